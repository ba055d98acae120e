#include "ranslicer/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

#include "ranslicer/phy.hpp"
#include "ranslicer/rng.hpp"

// Interior-point solver for the fixed-acceptance subproblem.
//
// Hermitian variables are parameterized by real vectors (n diagonal entries,
// then Re/Im of each upper off-diagonal), so the whole problem is an
// unconstrained barrier minimization over one real vector. The Newton
// Hessian is block diagonal across variable groups -- (omega_s, V_s) for an
// eMBB slice, (f_u, G_u) for a URLLC user -- except for the per-BS power and
// the shared bandwidth constraints, whose barrier terms are rank-one across
// groups and are folded in with a Woodbury update. A dense factorization is
// kept as a fallback.

namespace ranslicer::solver {

namespace {

constexpr double kLn2 = 0.69314718055994530942;
constexpr double kInteriorMargin = 1e-9;
constexpr double kViolationTol = 1e-8;
constexpr std::uint64_t kTagRandomize = Substream::tag("sdr-randomize");

// ---------------------------------------------------------------------------
// Hermitian parameterization

int herm_params(int n) { return n * n; }

Eigen::MatrixXcd herm_from_params(const double* p, int n) {
  Eigen::MatrixXcd m(n, n);
  for (int i = 0; i < n; ++i) m(i, i) = p[i];
  int k = n;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const std::complex<double> v(p[k], p[k + 1]);
      m(i, j) = v;
      m(j, i) = std::conj(v);
      k += 2;
    }
  return m;
}

void herm_to_params(const Eigen::MatrixXcd& m, double* p) {
  const int n = static_cast<int>(m.rows());
  for (int i = 0; i < n; ++i) p[i] = m(i, i).real();
  int k = n;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      p[k] = m(i, j).real();
      p[k + 1] = m(i, j).imag();
      k += 2;
    }
}

// Coefficients c with tr(H M(x)) = c . x for Hermitian H.
Eigen::VectorXd trace_form(const Eigen::MatrixXcd& h) {
  const int n = static_cast<int>(h.rows());
  Eigen::VectorXd c(herm_params(n));
  for (int i = 0; i < n; ++i) c(i) = h(i, i).real();
  int k = n;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      c(k++) = 2.0 * h(i, j).real();
      c(k++) = 2.0 * h(i, j).imag();
    }
  return c;
}

// Hessian of -ln det M at M (P = M^{-1}), added into `block` at `off`.
// Entry (k,l) is tr(P B_k P B_l); B_k are the sparse basis matrices, so each
// P B_k has at most two nonzero columns.
void add_lndet_hessian(const Eigen::MatrixXcd& p, Eigen::MatrixXd& block,
                       int off) {
  const int n = static_cast<int>(p.rows());
  const int np = herm_params(n);
  struct Cols {
    int c[2];
    Eigen::VectorXcd v[2];
    int cnt;
  };
  std::vector<Cols> bc(np);
  for (int i = 0; i < n; ++i) {
    bc[i].cnt = 1;
    bc[i].c[0] = i;
    bc[i].v[0] = p.col(i);
  }
  int k = n;
  const std::complex<double> im(0.0, 1.0);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      bc[k].cnt = 2;
      bc[k].c[0] = j;
      bc[k].v[0] = p.col(i);
      bc[k].c[1] = i;
      bc[k].v[1] = p.col(j);
      ++k;
      bc[k].cnt = 2;
      bc[k].c[0] = j;
      bc[k].v[0] = im * p.col(i);
      bc[k].c[1] = i;
      bc[k].v[1] = -im * p.col(j);
      ++k;
    }
  for (int a = 0; a < np; ++a)
    for (int b = a; b < np; ++b) {
      std::complex<double> t(0.0, 0.0);
      for (int x = 0; x < bc[a].cnt; ++x)
        for (int y = 0; y < bc[b].cnt; ++y)
          t += bc[a].v[x](bc[b].c[y]) * bc[b].v[y](bc[a].c[x]);
      block(off + a, off + b) += t.real();
      if (b > a) block(off + b, off + a) += t.real();
    }
}

// ---------------------------------------------------------------------------
// Scalar curve helpers

struct Curve {
  double value = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
};

// Required channel uses as a function of snr z: psi(z) = r(C(z)); convex and
// decreasing.
Curve psi_eval(double bits, double q2, double z) {
  const double lam = std::log1p(z);
  const double c = lam / kLn2;
  const double dc = 1.0 / ((1.0 + z) * kLn2);
  const double ddc = -1.0 / ((1.0 + z) * (1.0 + z) * kLn2);
  double r, dr, ddr;
  if (q2 <= 0.0) {
    r = bits / c;
    dr = -bits / (c * c);
    ddr = 2.0 * bits / (c * c * c);
  } else {
    const double g = std::sqrt(q2 * q2 + 4.0 * bits * q2 * c);
    const double c2 = c * c, c3 = c2 * c, c4 = c3 * c;
    r = bits / c + q2 / (2.0 * c2) + g / (2.0 * c2);
    dr = -bits / c2 - q2 / c3 + bits * q2 / (g * c2) - g / c3;
    ddr = 2.0 * bits / c3 + 3.0 * q2 / c4 -
          2.0 * bits * bits * q2 * q2 / (g * g * g * c2) -
          4.0 * bits * q2 / (g * c3) + 3.0 * g / c4;
  }
  Curve out;
  out.value = r;
  out.d1 = dr * dc;
  out.d2 = ddr * dc * dc + dr * ddc;
  return out;
}

// Bandwidth needed to meet rate R at snr z: h(z) = R ln2 / ln(1+z); convex
// and decreasing.
Curve qos_eval(double rate, double z) {
  const double rt = rate * kLn2;
  const double lam = std::log1p(z);
  Curve out;
  out.value = rt / lam;
  out.d1 = -rt / ((1.0 + z) * lam * lam);
  out.d2 = rt * (lam + 2.0) / ((1.0 + z) * (1.0 + z) * lam * lam * lam);
  return out;
}

// ---------------------------------------------------------------------------
// Compiled problem

struct GroupInfo {
  int offset = 0;
  bool has_scalar = false;  // omega (eMBB) or f (URLLC) at `offset`
  int dim = 0;
  bool is_embb = false;
  int entity = 0;  // index into prob.embb / prob.urllc
  int size() const { return (has_scalar ? 1 : 0) + dim * dim; }
  int mat_off() const { return has_scalar ? 1 : 0; }
};

struct Compiled {
  const ConvexSubproblem* prob = nullptr;
  int n = 0;
  int np = 0;
  int nvar = 0;
  std::vector<GroupInfo> groups;
  std::vector<int> embb_group;   // -1 when declined
  std::vector<int> urllc_group;  // -1 when masked off
  std::vector<std::vector<Eigen::VectorXd>> embb_zcoef;  // per entity, per UE
  std::vector<Eigen::VectorXd> urllc_zcoef;              // per entity
  Eigen::VectorXd diag_coef;                  // trace_form(I)
  std::vector<Eigen::VectorXd> bs_diag_coef;  // trace_form(Z_j)
  double q2_alpha = 0.0;
  double qinv_beta = 0.0;
  double fixed_omega_total = 0.0;  // accepted fixed bandwidths
  int num_scalar_constraints = 0;

  double mean_coef(const UrllcUser& u) const {
    const auto& pp = prob->params;
    if (pp.reservation == Reservation::continuous)
      return u.arrival_rate / (pp.numerology * u.deadline);
    return u.arrival_rate / pp.numerology;
  }
  double var_coef(const UrllcUser& u) const {
    const auto& pp = prob->params;
    return u.arrival_rate / (pp.numerology * pp.numerology * u.deadline);
  }
  bool staffed_norm() const {
    return prob->params.reservation == Reservation::staffed && qinv_beta > 0.0;
  }
};

Compiled compile(const ConvexSubproblem& prob) {
  prob.validate();
  Compiled c;
  c.prob = &prob;
  c.n = prob.params.vector_dim();
  c.np = herm_params(c.n);
  c.embb_group.assign(prob.embb.size(), -1);
  c.urllc_group.assign(prob.urllc.size(), -1);
  c.embb_zcoef.resize(prob.embb.size());
  c.urllc_zcoef.resize(prob.urllc.size());
  const double denom = prob.params.snr_loss * prob.params.noise_power;

  int off = 0;
  for (std::size_t s = 0; s < prob.embb.size(); ++s) {
    const auto& e = prob.embb[s];
    if (!e.accepted) continue;
    GroupInfo g;
    g.offset = off;
    g.has_scalar = e.fixed_bandwidth < 0.0;
    g.dim = c.n;
    g.is_embb = true;
    g.entity = static_cast<int>(s);
    c.embb_group[s] = static_cast<int>(c.groups.size());
    c.groups.push_back(g);
    off += g.size();
    if (e.fixed_bandwidth >= 0.0) c.fixed_omega_total += e.fixed_bandwidth;
    for (const auto& h : e.channels)
      c.embb_zcoef[s].push_back(trace_form((h * h.adjoint()) / denom));
  }
  for (std::size_t u = 0; u < prob.urllc.size(); ++u) {
    const auto& q = prob.urllc[u];
    if (!q.accepted) continue;
    GroupInfo g;
    g.offset = off;
    g.has_scalar = true;
    g.dim = c.n;
    g.is_embb = false;
    g.entity = static_cast<int>(u);
    c.urllc_group[u] = static_cast<int>(c.groups.size());
    c.groups.push_back(g);
    off += g.size();
    c.urllc_zcoef[u] = trace_form((q.channel * q.channel.adjoint()) / denom);
  }
  c.nvar = off;

  Eigen::MatrixXcd eye = Eigen::MatrixXcd::Identity(c.n, c.n);
  c.diag_coef = trace_form(eye);
  for (int j = 0; j < prob.params.num_bs; ++j) {
    Eigen::MatrixXcd zj = Eigen::MatrixXcd::Zero(c.n, c.n);
    for (int a = 0; a < prob.params.antennas_per_bs; ++a)
      zj(j * prob.params.antennas_per_bs + a,
         j * prob.params.antennas_per_bs + a) = 1.0;
    c.bs_diag_coef.push_back(trace_form(zj));
  }

  const double qa = phy::q_inverse(prob.params.decode_error);
  c.q2_alpha = qa * qa;
  c.qinv_beta = prob.params.reservation == Reservation::staffed
                    ? phy::q_inverse(prob.params.blocking_target)
                    : 0.0;
  if (prob.params.reservation == Reservation::staffed && c.qinv_beta < 0.0)
    throw std::invalid_argument(
        "solver: staffed reservation requires blocking_target < 0.5");

  int nsc = 0;
  for (std::size_t s = 0; s < prob.embb.size(); ++s)
    if (prob.embb[s].accepted) nsc += static_cast<int>(prob.embb[s].channels.size());
  for (std::size_t u = 0; u < prob.urllc.size(); ++u)
    if (prob.urllc[u].accepted)
      nsc += 1 + (prob.params.snr_case == SnrCase::enforced ? 1 : 0);
  if (!c.groups.empty()) nsc += prob.params.num_bs + 1;
  c.num_scalar_constraints = nsc;
  return c;
}

// ---------------------------------------------------------------------------
// Point evaluation

struct Eval {
  bool pd = false;         // all matrices positive definite
  bool in_domain = false;  // pd and all barrier slacks positive
  double fvar = 0.0;
  double lndet_total = 0.0;
  double min_raw_slack = 0.0;  // without the phase-1 relaxation
  std::vector<std::vector<double>> embb_z;
  std::vector<double> urllc_z;
  std::vector<Curve> psi;               // per urllc entity (accepted)
  std::vector<double> qos_slack;        // flattened (accepted embb x ue)
  std::vector<double> snr_slack;        // per urllc entity (case I)
  std::vector<double> f_slack;          // per urllc entity
  std::vector<double> power_slack;      // per BS, normalized
  double bw_slack = 0.0;                // normalized
  double resv_norm = 0.0;               // sqrt(sum v_u f_u^2)
  std::vector<Eigen::MatrixXcd> mats;   // per group
  std::vector<Eigen::MatrixXcd> inv;    // per group (when requested)
};

Eval evaluate(const Compiled& c, const Eigen::VectorXd& x, double relax,
              bool want_inverse) {
  const auto& prob = *c.prob;
  const auto& pp = prob.params;
  Eval ev;
  ev.mats.resize(c.groups.size());
  if (want_inverse) ev.inv.resize(c.groups.size());
  ev.embb_z.resize(prob.embb.size());
  ev.urllc_z.assign(prob.urllc.size(), 0.0);
  ev.psi.resize(prob.urllc.size());
  ev.pd = true;

  for (std::size_t g = 0; g < c.groups.size(); ++g) {
    const auto& gi = c.groups[g];
    ev.mats[g] = herm_from_params(x.data() + gi.offset + gi.mat_off(), gi.dim);
    Eigen::LLT<Eigen::MatrixXcd> llt(ev.mats[g]);
    if (llt.info() != Eigen::Success) {
      ev.pd = false;
      return ev;
    }
    const auto& l = llt.matrixL();
    for (int i = 0; i < gi.dim; ++i)
      ev.lndet_total += 2.0 * std::log(l(i, i).real());
    if (want_inverse)
      ev.inv[g] = llt.solve(Eigen::MatrixXcd::Identity(gi.dim, gi.dim));
  }

  double min_slack = std::numeric_limits<double>::infinity();
  const auto push = [&](std::vector<double>& dst, double raw) {
    min_slack = std::min(min_slack, raw);
    dst.push_back(raw + relax);
  };

  double fvar = 0.0;
  // eMBB: z per UE, QoS slacks, profit/power objective
  for (std::size_t s = 0; s < prob.embb.size(); ++s) {
    const int g = c.embb_group[s];
    if (g < 0) continue;
    const auto& gi = c.groups[g];
    const auto xv = x.segment(gi.offset + gi.mat_off(), c.np);
    const double omega = gi.has_scalar ? x(gi.offset)
                                       : prob.embb[s].fixed_bandwidth;
    for (std::size_t i = 0; i < c.embb_zcoef[s].size(); ++i) {
      const double z = c.embb_zcoef[s][i].dot(xv);
      ev.embb_z[s].push_back(z);
      fvar += std::log1p(std::max(z, -0.999999));
      const double need = z > 0.0 ? qos_eval(prob.embb[s].min_rate, z).value
                                  : std::numeric_limits<double>::infinity();
      push(ev.qos_slack, (omega - need) / pp.total_bandwidth);
    }
    fvar -= pp.eta * ev.mats[g].trace().real();
  }
  // URLLC: z, min-SNR, channel-use slack, objective
  for (std::size_t u = 0; u < prob.urllc.size(); ++u) {
    const int g = c.urllc_group[u];
    if (g < 0) continue;
    const auto& gi = c.groups[g];
    const auto xg = x.segment(gi.offset + gi.mat_off(), c.np);
    const double z = c.urllc_zcoef[u].dot(xg);
    ev.urllc_z[u] = z;
    fvar += pp.priority_weight * std::log1p(std::max(z, -0.999999));
    fvar -= pp.priority_weight * pp.eta * ev.mats[g].trace().real();
    if (pp.snr_case == SnrCase::enforced)
      push(ev.snr_slack, (z - pp.min_snr) / pp.min_snr);
    const double f = x(gi.offset);
    if (z > 0.0) {
      ev.psi[u] = psi_eval(prob.urllc[u].packet_bits, c.q2_alpha, z);
      push(ev.f_slack, f - ev.psi[u].value);
    } else {
      push(ev.f_slack, -1e30);  // unreachable while G stays PD
    }
  }
  if (!c.groups.empty()) {
    // per-BS power
    for (int j = 0; j < pp.num_bs; ++j) {
      double used = 0.0;
      for (std::size_t g = 0; g < c.groups.size(); ++g) {
        const auto& gi = c.groups[g];
        used += c.bs_diag_coef[j].dot(x.segment(gi.offset + gi.mat_off(), c.np));
      }
      push(ev.power_slack, (pp.bs_power[j] - used) / pp.bs_power[j]);
    }
    // shared bandwidth
    double used = c.fixed_omega_total;
    double var_sum = 0.0;
    for (std::size_t g = 0; g < c.groups.size(); ++g) {
      const auto& gi = c.groups[g];
      if (!gi.has_scalar) continue;
      if (gi.is_embb) {
        used += x(gi.offset);
      } else {
        const auto& uu = prob.urllc[gi.entity];
        const double f = x(gi.offset);
        used += c.mean_coef(uu) * f;
        if (c.staffed_norm()) var_sum += c.var_coef(uu) * f * f;
      }
    }
    ev.resv_norm = std::sqrt(std::max(var_sum, 0.0));
    used += c.qinv_beta * ev.resv_norm;
    const double raw = (pp.total_bandwidth - used) / pp.total_bandwidth;
    min_slack = std::min(min_slack, raw);
    ev.bw_slack = raw + relax;
  }

  ev.fvar = fvar;
  ev.min_raw_slack = c.num_scalar_constraints > 0 ? min_slack
                                                  : std::numeric_limits<double>::infinity();
  ev.in_domain = true;
  for (double v : ev.qos_slack) ev.in_domain &= v > 0.0;
  for (double v : ev.snr_slack) ev.in_domain &= v > 0.0;
  for (double v : ev.f_slack) ev.in_domain &= v > 0.0;
  for (double v : ev.power_slack) ev.in_domain &= v > 0.0;
  if (!c.groups.empty()) ev.in_domain &= ev.bw_slack > 0.0;
  return ev;
}

double merit(const Eval& ev, double t, bool phase1, double relax) {
  double m = phase1 ? t * relax : -t * ev.fvar;
  m -= ev.lndet_total;
  for (double v : ev.qos_slack) m -= std::log(v);
  for (double v : ev.snr_slack) m -= std::log(v);
  for (double v : ev.f_slack) m -= std::log(v);
  for (double v : ev.power_slack) m -= std::log(v);
  if (!ev.power_slack.empty()) m -= std::log(ev.bw_slack);
  return m;
}

// ---------------------------------------------------------------------------
// Newton system assembly

struct NewtonSys {
  Eigen::VectorXd grad;
  std::vector<Eigen::MatrixXd> blocks;  // per group (+ relaxation var last)
  std::vector<std::pair<Eigen::VectorXd, double>> cross;  // H += w * u u^T
  std::vector<std::pair<int, int>> spans;                 // (offset, size)
};

// Adds the barrier of one scalar constraint with slack `c` and gradient
// pieces {group -> local grad}. Support within a single group goes into the
// block; anything wider (or any phase-1 constraint) becomes a rank-one
// cross term.
void add_scalar_barrier(NewtonSys& sys, bool phase1, int nv, double slack,
                        const std::vector<std::pair<const GroupInfo*,
                                                    Eigen::VectorXd>>& pieces) {
  if (pieces.empty() && !phase1) return;  // constant constraint
  const double inv_c = 1.0 / slack;
  for (const auto& [gi, vec] : pieces)
    sys.grad.segment(gi->offset, gi->size()) -= inv_c * vec;
  if (phase1) sys.grad(nv - 1) -= inv_c;

  if (!phase1 && pieces.size() == 1) {
    const auto& [gi, vec] = pieces[0];
    for (std::size_t b = 0; b < sys.spans.size(); ++b)
      if (sys.spans[b].first == gi->offset) {
        sys.blocks[b] += (inv_c * inv_c) * (vec * vec.transpose());
        return;
      }
  }
  Eigen::VectorXd u = Eigen::VectorXd::Zero(nv);
  for (const auto& [gi, vec] : pieces)
    u.segment(gi->offset, gi->size()) = vec;
  if (phase1) u(nv - 1) = 1.0;
  sys.cross.emplace_back(std::move(u), inv_c * inv_c);
}

NewtonSys assemble(const Compiled& c, const Eigen::VectorXd& x,
                   const Eval& ev, double t, bool phase1) {
  const auto& prob = *c.prob;
  const auto& pp = prob.params;
  const int nv = c.nvar + (phase1 ? 1 : 0);
  NewtonSys sys;
  sys.grad = Eigen::VectorXd::Zero(nv);
  for (const auto& gi : c.groups) sys.spans.emplace_back(gi.offset, gi.size());
  if (phase1) sys.spans.emplace_back(c.nvar, 1);
  for (const auto& [off, sz] : sys.spans)
    sys.blocks.emplace_back(Eigen::MatrixXd::Zero(sz, sz));

  // objective and ln det terms (gradient; curvature into blocks)
  for (std::size_t g = 0; g < c.groups.size(); ++g) {
    const auto& gi = c.groups[g];
    auto& block = sys.blocks[g];
    const int mo = gi.mat_off();
    // -ln det barrier
    const Eigen::VectorXd pcoef = trace_form(ev.inv[g]);
    sys.grad.segment(gi.offset + mo, c.np) -= pcoef;
    add_lndet_hessian(ev.inv[g], block, mo);
    if (phase1) continue;  // phase 1 ignores the utility objective
    if (gi.is_embb) {
      const auto& zc = c.embb_zcoef[gi.entity];
      for (std::size_t i = 0; i < zc.size(); ++i) {
        const double z = ev.embb_z[gi.entity][i];
        sys.grad.segment(gi.offset + mo, c.np) -= (t / (1.0 + z)) * zc[i];
        block.block(mo, mo, c.np, c.np) +=
            (t / ((1.0 + z) * (1.0 + z))) * (zc[i] * zc[i].transpose());
      }
      sys.grad.segment(gi.offset + mo, c.np) += t * pp.eta * c.diag_coef;
    } else {
      const double w = pp.priority_weight;
      const double z = ev.urllc_z[gi.entity];
      const auto& zc = c.urllc_zcoef[gi.entity];
      sys.grad.segment(gi.offset + mo, c.np) -= (t * w / (1.0 + z)) * zc;
      block.block(mo, mo, c.np, c.np) +=
          (t * w / ((1.0 + z) * (1.0 + z))) * (zc * zc.transpose());
      sys.grad.segment(gi.offset + mo, c.np) += t * w * pp.eta * c.diag_coef;
    }
  }
  if (phase1) {
    sys.grad(nv - 1) += t;            // minimize the relaxation
    sys.blocks.back()(0, 0) += 1e-8;  // ridge; curvature comes from barriers
  }

  // QoS barriers
  int qos_ix = 0;
  for (std::size_t s = 0; s < prob.embb.size(); ++s) {
    const int g = c.embb_group[s];
    if (g < 0) continue;
    const auto& gi = c.groups[g];
    const int mo = gi.mat_off();
    for (std::size_t i = 0; i < c.embb_zcoef[s].size(); ++i, ++qos_ix) {
      const double z = ev.embb_z[s][i];
      const Curve h = qos_eval(prob.embb[s].min_rate, z);
      const double slack = ev.qos_slack[qos_ix];
      Eigen::VectorXd local = Eigen::VectorXd::Zero(gi.size());
      if (gi.has_scalar) local(0) = 1.0 / pp.total_bandwidth;
      local.segment(mo, c.np) =
          (-h.d1 / pp.total_bandwidth) * c.embb_zcoef[s][i];
      add_scalar_barrier(sys, phase1, nv, slack, {{&gi, local}});
      // curvature: -(1/c) * grad^2 of (omega - h)/W  ->  +(h''/(c W)) a a^T
      sys.blocks[g].block(mo, mo, c.np, c.np) +=
          (h.d2 / (slack * pp.total_bandwidth)) *
          (c.embb_zcoef[s][i] * c.embb_zcoef[s][i].transpose());
    }
  }
  // URLLC min-SNR and channel-use slack barriers
  int snr_ix = 0, f_ix = 0;
  for (std::size_t u = 0; u < prob.urllc.size(); ++u) {
    const int g = c.urllc_group[u];
    if (g < 0) continue;
    const auto& gi = c.groups[g];
    const int mo = gi.mat_off();
    if (pp.snr_case == SnrCase::enforced) {
      Eigen::VectorXd local = Eigen::VectorXd::Zero(gi.size());
      local.segment(mo, c.np) = (1.0 / pp.min_snr) * c.urllc_zcoef[u];
      add_scalar_barrier(sys, phase1, nv, ev.snr_slack[snr_ix], {{&gi, local}});
      ++snr_ix;
    }
    const Curve& psi = ev.psi[u];
    const double slack = ev.f_slack[f_ix];
    Eigen::VectorXd local = Eigen::VectorXd::Zero(gi.size());
    local(0) = 1.0;
    local.segment(mo, c.np) = -psi.d1 * c.urllc_zcoef[u];
    add_scalar_barrier(sys, phase1, nv, slack, {{&gi, local}});
    sys.blocks[g].block(mo, mo, c.np, c.np) +=
        (psi.d2 / slack) * (c.urllc_zcoef[u] * c.urllc_zcoef[u].transpose());
    ++f_ix;
  }
  if (!c.groups.empty()) {
    // per-BS power
    for (int j = 0; j < pp.num_bs; ++j) {
      std::vector<std::pair<const GroupInfo*, Eigen::VectorXd>> pieces;
      for (const auto& gi : c.groups) {
        Eigen::VectorXd local = Eigen::VectorXd::Zero(gi.size());
        local.segment(gi.mat_off(), c.np) =
            (-1.0 / pp.bs_power[j]) * c.bs_diag_coef[j];
        pieces.emplace_back(&gi, std::move(local));
      }
      add_scalar_barrier(sys, phase1, nv, ev.power_slack[j], pieces);
    }
    // shared bandwidth
    std::vector<std::pair<const GroupInfo*, Eigen::VectorXd>> pieces;
    const double w_inv = 1.0 / pp.total_bandwidth;
    const bool norm_on = c.staffed_norm() && ev.resv_norm > 0.0;
    Eigen::VectorXd norm_vec;  // f-coordinates of (v o f) for the curvature
    if (norm_on) norm_vec = Eigen::VectorXd::Zero(nv);
    for (const auto& gi : c.groups) {
      if (!gi.has_scalar) continue;
      Eigen::VectorXd local = Eigen::VectorXd::Zero(gi.size());
      if (gi.is_embb) {
        local(0) = -w_inv;
      } else {
        const auto& uu = prob.urllc[gi.entity];
        double coef = c.mean_coef(uu);
        if (norm_on) {
          const double vf = c.var_coef(uu) * x(gi.offset);
          coef += c.qinv_beta * vf / ev.resv_norm;
          norm_vec(gi.offset) = vf;
        }
        local(0) = -coef * w_inv;
      }
      pieces.emplace_back(&gi, std::move(local));
    }
    if (!pieces.empty() || c.fixed_omega_total > 0.0)
      add_scalar_barrier(sys, phase1, nv, ev.bw_slack, pieces);
    if (norm_on) {
      const double scale =
          c.qinv_beta * w_inv / (ev.bw_slack * ev.resv_norm);
      for (const auto& gi : c.groups) {
        if (gi.is_embb || !gi.has_scalar) continue;
        const auto& uu = prob.urllc[gi.entity];
        for (std::size_t b = 0; b < sys.spans.size(); ++b)
          if (sys.spans[b].first == gi.offset)
            sys.blocks[b](0, 0) += scale * c.var_coef(uu);
      }
      sys.cross.emplace_back(norm_vec,
                             -scale / (ev.resv_norm * ev.resv_norm));
    }
  }
  return sys;
}

// Solves H p = -grad with H = blockdiag + sum w u u^T.
bool newton_direction(const NewtonSys& sys, Eigen::VectorXd& p,
                      double& decrement2) {
  const int nv = static_cast<int>(sys.grad.size());
  std::vector<Eigen::LLT<Eigen::MatrixXd>> llts;
  llts.reserve(sys.blocks.size());
  bool blocks_ok = true;
  for (std::size_t b = 0; b < sys.blocks.size() && blocks_ok; ++b) {
    Eigen::MatrixXd m = sys.blocks[b];
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() != Eigen::Success) {
      m.diagonal().array() += 1e-10 * (1.0 + m.diagonal().cwiseAbs().maxCoeff());
      llt.compute(m);
      if (llt.info() != Eigen::Success) blocks_ok = false;
    }
    llts.push_back(std::move(llt));
  }

  const auto block_solve = [&](const Eigen::VectorXd& r) {
    Eigen::VectorXd out(nv);
    for (std::size_t b = 0; b < sys.spans.size(); ++b) {
      const auto& [off, sz] = sys.spans[b];
      out.segment(off, sz) = llts[b].solve(r.segment(off, sz));
    }
    return out;
  };

  if (blocks_ok) {
    Eigen::VectorXd y = block_solve(-sys.grad);
    if (!sys.cross.empty()) {
      const int k = static_cast<int>(sys.cross.size());
      Eigen::MatrixXd xmat(nv, k);
      Eigen::MatrixXd smat = Eigen::MatrixXd::Zero(k, k);
      for (int i = 0; i < k; ++i) xmat.col(i) = block_solve(sys.cross[i].first);
      for (int i = 0; i < k; ++i) {
        smat(i, i) = 1.0 / sys.cross[i].second;
        for (int j = 0; j < k; ++j)
          smat(i, j) += sys.cross[i].first.dot(xmat.col(j));
      }
      Eigen::VectorXd rhs(k);
      for (int i = 0; i < k; ++i) rhs(i) = sys.cross[i].first.dot(y);
      Eigen::PartialPivLU<Eigen::MatrixXd> lu(smat);
      const Eigen::VectorXd corr = lu.solve(rhs);
      if (corr.allFinite()) {
        p = y - xmat * corr;
        decrement2 = -sys.grad.dot(p);
        if (std::isfinite(decrement2) && decrement2 >= -1e-9) return true;
      }
    } else {
      p = y;
      decrement2 = -sys.grad.dot(p);
      if (std::isfinite(decrement2) && decrement2 >= -1e-9) return true;
    }
  }

  // dense fallback
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(nv, nv);
  for (std::size_t b = 0; b < sys.spans.size(); ++b)
    h.block(sys.spans[b].first, sys.spans[b].first, sys.spans[b].second,
            sys.spans[b].second) = sys.blocks[b];
  for (const auto& [u, w] : sys.cross) h += w * (u * u.transpose());
  h.diagonal().array() += 1e-12 * (1.0 + h.diagonal().cwiseAbs().maxCoeff());
  Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
  if (ldlt.info() != Eigen::Success) return false;
  p = ldlt.solve(-sys.grad);
  decrement2 = -sys.grad.dot(p);
  return p.allFinite() && decrement2 >= -1e-6;
}

// ---------------------------------------------------------------------------
// Barrier loops

struct IpmCounters {
  int newton = 0;
  int outer = 0;
};

struct CenterStatus {
  bool progressed = false;  // entry point was usable
  bool centered = false;    // Newton decrement reached the tolerance
};

// Centers at fixed t. The duality-gap bound theta/t is only meaningful when
// `centered` comes back true.
CenterStatus center(const Compiled& c, Eigen::VectorXd& x, double& relax,
                    double t, bool phase1, const SolveOptions& opt,
                    IpmCounters& counters, Eval& ev,
                    double stop_min_slack = -1.0, double centering_tol = -1.0) {
  CenterStatus st;
  if (centering_tol <= 0.0) centering_tol = opt.centering_tol;
  ev = evaluate(c, x, phase1 ? relax : 0.0, false);
  if (!ev.pd || !ev.in_domain) return st;
  st.progressed = true;
  for (int it = 0; it < opt.max_newton_per_stage; ++it) {
    if (stop_min_slack > 0.0 && ev.min_raw_slack >= stop_min_slack) return st;
    const Eval full = evaluate(c, x, phase1 ? relax : 0.0, true);
    NewtonSys sys = assemble(c, x, full, t, phase1);
    Eigen::VectorXd p;
    double dec2 = 0.0;
    if (!newton_direction(sys, p, dec2)) return st;
    ++counters.newton;
    if (dec2 * 0.5 <= centering_tol) {
      st.centered = true;
      return st;
    }
    const double m0 = merit(ev, t, phase1, relax);
    const double slope = sys.grad.dot(p);
    double alpha = 1.0;
    bool stepped = false;
    for (int ls = 0; ls < 60; ++ls) {
      Eigen::VectorXd xt = x + alpha * p.head(c.nvar);
      const double rt = phase1 ? relax + alpha * p(c.nvar) : 0.0;
      Eval evt = evaluate(c, xt, rt, false);
      if (evt.pd && evt.in_domain &&
          merit(evt, t, phase1, rt) <= m0 + 0.3 * alpha * slope) {
        x = std::move(xt);
        if (phase1) relax = rt;
        ev = std::move(evt);
        stepped = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!stepped) {
      // merit changes dipped below measurable precision
      st.centered = dec2 * 0.5 <= std::max(centering_tol, 1e-5);
      return st;
    }
  }
  return st;
}

double barrier_complexity(const Compiled& c) {
  double theta = c.num_scalar_constraints;
  for (const auto& gi : c.groups) theta += gi.dim;
  return std::max(theta, 1.0);
}

// ---------------------------------------------------------------------------
// Starting points

void seed_matrix(const Compiled& c, Eigen::VectorXd& x, const GroupInfo& gi,
                 const Eigen::MatrixXcd& shape) {
  const auto& pp = c.prob->params;
  const int n_ent = static_cast<int>(c.groups.size());
  Eigen::MatrixXcd m = shape;
  m += (1e-9 * std::max(m.trace().real(), 1e-30) / c.n + 1e-30) *
       Eigen::MatrixXcd::Identity(c.n, c.n);
  double scale = std::numeric_limits<double>::infinity();
  for (int j = 0; j < pp.num_bs; ++j) {
    double pj = 0.0;
    for (int a = 0; a < pp.antennas_per_bs; ++a)
      pj += m(j * pp.antennas_per_bs + a, j * pp.antennas_per_bs + a).real();
    if (pj > 0.0)
      scale = std::min(scale, 0.4 * pp.bs_power[j] / (n_ent * pj));
  }
  if (!std::isfinite(scale)) scale = 1.0;
  m *= scale;
  m += (1e-12 * m.trace().real() / c.n + 1e-20) *
       Eigen::MatrixXcd::Identity(c.n, c.n);
  herm_to_params(m, x.data() + gi.offset + gi.mat_off());
}

Eigen::VectorXd construct_start(const Compiled& c, const WarmStart* warm) {
  const auto& prob = *c.prob;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(c.nvar);
  const double denom = prob.params.snr_loss * prob.params.noise_power;
  for (std::size_t g = 0; g < c.groups.size(); ++g) {
    const auto& gi = c.groups[g];
    bool seeded = false;
    if (warm) {
      const auto& src = gi.is_embb ? warm->embb_covariance
                                   : warm->urllc_covariance;
      const std::size_t e = static_cast<std::size_t>(gi.entity);
      if (e < src.size() && src[e].rows() == c.n &&
          src[e].trace().real() > 1e-18) {
        // keep the shape but move well inside the cone: a previous solution
        // is nearly rank one and would start the barrier at a huge Hessian
        Eigen::MatrixXcd m = 0.5 * (src[e] + src[e].adjoint());
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(m);
        const double floor = 1e-3 * std::max(es.eigenvalues().maxCoeff(), 1e-12);
        Eigen::VectorXd evs = es.eigenvalues().cwiseMax(floor);
        m = es.eigenvectors() * evs.asDiagonal() * es.eigenvectors().adjoint();
        herm_to_params(m, x.data() + gi.offset + gi.mat_off());
        seeded = true;
      }
    }
    if (!seeded) {
      Eigen::MatrixXcd shape = Eigen::MatrixXcd::Zero(c.n, c.n);
      if (gi.is_embb)
        for (const auto& h : prob.embb[gi.entity].channels)
          shape += h * h.adjoint();
      else
        shape = prob.urllc[gi.entity].channel *
                prob.urllc[gi.entity].channel.adjoint();
      seed_matrix(c, x, gi, shape / denom);
    }
  }
  // scalars from the seeded matrices
  for (std::size_t g = 0; g < c.groups.size(); ++g) {
    const auto& gi = c.groups[g];
    if (!gi.has_scalar) continue;
    const auto xg = x.segment(gi.offset + gi.mat_off(), c.np);
    if (gi.is_embb) {
      double zmin = std::numeric_limits<double>::infinity();
      for (const auto& zc : c.embb_zcoef[gi.entity])
        zmin = std::min(zmin, zc.dot(xg));
      double omega = zmin > 0.0
                         ? 1.1 * qos_eval(prob.embb[gi.entity].min_rate, zmin).value
                         : prob.params.total_bandwidth;
      if (warm && static_cast<std::size_t>(gi.entity) < warm->embb_bandwidth.size() &&
          warm->embb_bandwidth[gi.entity] > omega)
        omega = warm->embb_bandwidth[gi.entity];
      x(gi.offset) = omega;
    } else {
      const double z = c.urllc_zcoef[gi.entity].dot(xg);
      const double psi =
          z > 0.0 ? psi_eval(prob.urllc[gi.entity].packet_bits, c.q2_alpha, z).value
                  : 1.0;
      double f = 1.05 * psi + 1e-3;
      if (warm && static_cast<std::size_t>(gi.entity) < warm->channel_use_slack.size() &&
          warm->channel_use_slack[gi.entity] > f)
        f = warm->channel_use_slack[gi.entity];
      x(gi.offset) = f;
    }
  }
  return x;
}

// Witness construction: spread a fraction of the power budget evenly across
// the accepted entities along maximum-ratio shapes and check every
// constraint with strict margins. Fills `x` and returns true on success.
bool try_witness(const Compiled& c, Eigen::VectorXd& x) {
  const auto& prob = *c.prob;
  const auto& pp = prob.params;
  const double denom = pp.snr_loss * pp.noise_power;
  for (double frac : {0.35, 0.8}) {
    x.setZero(c.nvar);
    const int n_ent = static_cast<int>(c.groups.size());
    bool ok = true;
    for (const auto& gi : c.groups) {
      Eigen::MatrixXcd shape = Eigen::MatrixXcd::Zero(c.n, c.n);
      if (gi.is_embb)
        for (const auto& h : prob.embb[gi.entity].channels)
          shape += (h * h.adjoint()) / denom;
      else
        shape = (prob.urllc[gi.entity].channel *
                 prob.urllc[gi.entity].channel.adjoint()) /
                denom;
      shape += 1e-12 * std::max(shape.trace().real() / c.n, 1e-30) *
               Eigen::MatrixXcd::Identity(c.n, c.n);
      double scale = std::numeric_limits<double>::infinity();
      for (int j = 0; j < pp.num_bs; ++j) {
        double pj = 0.0;
        for (int a = 0; a < pp.antennas_per_bs; ++a)
          pj += shape(j * pp.antennas_per_bs + a, j * pp.antennas_per_bs + a)
                    .real();
        if (pj > 0.0)
          scale = std::min(scale, frac * pp.bs_power[j] / (n_ent * pj));
      }
      if (!std::isfinite(scale)) {
        ok = false;
        break;
      }
      Eigen::MatrixXcd m = scale * shape;
      herm_to_params(m, x.data() + gi.offset + gi.mat_off());
    }
    if (!ok) continue;
    for (const auto& gi : c.groups) {
      if (!gi.has_scalar) continue;
      const auto xg = x.segment(gi.offset + gi.mat_off(), c.np);
      if (gi.is_embb) {
        double zmin = std::numeric_limits<double>::infinity();
        for (const auto& zc : c.embb_zcoef[gi.entity])
          zmin = std::min(zmin, zc.dot(xg));
        if (zmin <= 0.0) {
          ok = false;
          break;
        }
        x(gi.offset) =
            (1.0 + 1e-6) * qos_eval(prob.embb[gi.entity].min_rate, zmin).value;
      } else {
        const double z = c.urllc_zcoef[gi.entity].dot(xg);
        if (z <= 0.0) {
          ok = false;
          break;
        }
        x(gi.offset) =
            (1.0 + 1e-6) *
                psi_eval(prob.urllc[gi.entity].packet_bits, c.q2_alpha, z).value +
            1e-9;
      }
    }
    if (!ok) continue;
    Eval ev = evaluate(c, x, 0.0, false);
    if (ev.pd && ev.min_raw_slack > 1e-7) return true;
  }
  return false;
}

// ---------------------------------------------------------------------------
// Phase 1: minimize the worst constraint violation.

struct Phase1Out {
  bool interior = false;
  double violation = 0.0;  // best achieved max-violation (normalized units)
  Eigen::VectorXd x;
  bool iteration_cap = false;
};

Phase1Out phase1(const Compiled& c, Eigen::VectorXd x,
                 const SolveOptions& opt, IpmCounters& counters) {
  Phase1Out out;
  Eval ev = evaluate(c, x, 0.0, false);
  if (ev.pd && ev.min_raw_slack >= kInteriorMargin) {
    out.interior = true;
    out.x = std::move(x);
    return out;
  }
  double relax = ev.pd ? std::max(1e-2, -1.5 * ev.min_raw_slack) : 1.0;
  const double theta = barrier_complexity(c);
  double t = 1.0;
  int retries = 0;
  const int newton_start = counters.newton;
  for (int stage = 0; stage < opt.max_outer; ++stage) {
    if (counters.newton - newton_start > opt.phase1_newton_budget) {
      out.iteration_cap = true;
      break;
    }
    ++counters.outer;
    Eval cur;
    const CenterStatus st = center(c, x, relax, t, true, opt, counters, cur,
                                   kInteriorMargin * 10.0);
    if (!st.progressed) break;
    if (cur.min_raw_slack >= kInteriorMargin) {
      out.interior = true;
      out.x = std::move(x);
      return out;
    }
    const double gap = theta / t;
    const double s_now = -cur.min_raw_slack;  // violation at current point
    if (st.centered) {
      retries = 0;
      // on the central path, s* >= s_now - theta/t: a clear excess over the
      // tolerance certifies infeasibility
      if (s_now - gap > kViolationTol || gap <= 1e-10) {
        out.violation = std::max(s_now, 0.0);
        out.x = std::move(x);
        return out;
      }
      t *= opt.barrier_growth;
    } else if (++retries >= 3) {
      retries = 0;
      t *= opt.barrier_growth;  // stop re-trying this stage
    }
    if (stage == opt.max_outer - 1) out.iteration_cap = true;
  }
  Eval fin = evaluate(c, x, 0.0, false);
  out.violation = fin.pd ? std::max(-fin.min_raw_slack, 0.0) : 1.0;
  out.x = std::move(x);
  return out;
}

// ---------------------------------------------------------------------------
// Cheap infeasibility certificate. For any covariance, tr(H M) <=
// ||h||^2 tr(M), and the traces share the total power budget sum_j E_j, so
// minimizing the total bandwidth demand over that power split (a separable
// convex problem, solved by bisection on the power price) lower-bounds the
// bandwidth any feasible point needs. The staffed reservation is bounded
// below by its mean term. Returns the normalized excess over the budget,
// 0 when inconclusive.

struct BoundEntity {
  double gain = 0.0;     // z <= gain * power
  double p_min = 0.0;    // Case-I floor or fixed-omega QoS
  double rate = 0.0;     // > 0: eMBB slice with free bandwidth
  double resv_coef = 0.0;  // urllc: bandwidth per channel use
  double bits = 0.0;
};

double bound_cost(const Compiled& c, const BoundEntity& e, double p) {
  const double z = e.gain * p;
  if (z <= 0.0) return std::numeric_limits<double>::infinity();
  if (e.rate > 0.0) return qos_eval(e.rate, z).value;
  return e.resv_coef * psi_eval(e.bits, c.q2_alpha, z).value;
}

double infeasibility_lower_bound(const Compiled& c) {
  const auto& prob = *c.prob;
  const auto& pp = prob.params;
  const double denom = pp.snr_loss * pp.noise_power;
  double esum = 0.0;
  for (double e : pp.bs_power) esum += e;

  double fixed_need = c.fixed_omega_total;
  std::vector<BoundEntity> ents;
  for (std::size_t s = 0; s < prob.embb.size(); ++s) {
    const auto& e = prob.embb[s];
    if (!e.accepted) continue;
    BoundEntity b;
    b.gain = std::numeric_limits<double>::infinity();
    for (const auto& h : e.channels)
      b.gain = std::min(b.gain, h.squaredNorm() / denom);
    if (b.gain <= 0.0) return 1.0;
    if (e.fixed_bandwidth >= 0.0) {
      // fixed omega: the rate pins a minimum snr, hence a minimum power
      const double z_need =
          std::pow(2.0, e.min_rate / std::max(e.fixed_bandwidth, 1e-300)) - 1.0;
      if (e.fixed_bandwidth <= 0.0) return 1.0;
      b.p_min = z_need / b.gain;
      b.rate = 0.0;
      b.resv_coef = 0.0;
      ents.push_back(b);
    } else {
      b.rate = e.min_rate;
      ents.push_back(b);
    }
  }
  for (std::size_t u = 0; u < prob.urllc.size(); ++u) {
    const auto& q = prob.urllc[u];
    if (!q.accepted) continue;
    BoundEntity b;
    b.gain = q.channel.squaredNorm() / denom;
    if (b.gain <= 0.0) return 1.0;
    if (pp.snr_case == SnrCase::enforced) b.p_min = pp.min_snr / b.gain;
    b.resv_coef = c.mean_coef(q);
    b.bits = q.packet_bits;
    ents.push_back(b);
  }
  if (ents.empty())
    return fixed_need > pp.total_bandwidth * (1.0 + 1e-12)
               ? fixed_need / pp.total_bandwidth - 1.0
               : 0.0;

  double p_floor = 0.0;
  for (const auto& e : ents) p_floor += e.p_min;
  if (p_floor > esum * (1.0 + 1e-12))
    return (p_floor - esum) / esum;  // the power budget alone cannot do it

  // allocate power by bisecting the price mu; each entity picks
  // argmin_p cost(p) + mu p  with p >= p_min
  const auto alloc = [&](const BoundEntity& e, double mu) {
    double lo = std::max(e.p_min, 1e-18), hi = esum;
    if (e.rate <= 0.0 && e.resv_coef <= 0.0) return std::max(e.p_min, 0.0);
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (lo + hi);
      const double h = 1e-4 * mid;
      const double d =
          (bound_cost(c, e, mid + h) - bound_cost(c, e, mid - h)) / (2.0 * h);
      if (d + mu < 0.0)
        lo = mid;
      else
        hi = mid;
    }
    return 0.5 * (lo + hi);
  };
  double mu_lo = 1e-12, mu_hi = 1e15;
  for (int it = 0; it < 80; ++it) {
    const double mu = std::sqrt(mu_lo * mu_hi);
    double total = 0.0;
    for (const auto& e : ents) total += alloc(e, mu);
    if (total > esum)
      mu_lo = mu;
    else
      mu_hi = mu;
  }
  // weak duality: for any mu >= 0 the demand is at least
  // sum_e min_p [cost_e(p) + mu p] - mu * P
  double need = fixed_need - mu_hi * esum;
  for (const auto& e : ents) {
    const double p = alloc(e, mu_hi);
    need += bound_cost(c, e, p) + mu_hi * p;
  }
  if (need > pp.total_bandwidth * (1.0 + 1e-6))
    return need / pp.total_bandwidth - 1.0;
  return 0.0;
}

// ---------------------------------------------------------------------------
// Result packaging

void fill_result(const Compiled& c, const Eigen::VectorXd& x, SolveResult& r) {
  const auto& prob = *c.prob;
  const int n = c.n;
  r.embb_bandwidth.assign(prob.embb.size(), 0.0);
  r.embb_covariance.assign(prob.embb.size(), Eigen::MatrixXcd::Zero(n, n));
  r.urllc_covariance.assign(prob.urllc.size(), Eigen::MatrixXcd::Zero(n, n));
  r.channel_use_slack.assign(prob.urllc.size(), 0.0);
  r.embb_tightness.assign(prob.embb.size(), 0.0);
  r.urllc_tightness.assign(prob.urllc.size(), 0.0);
  for (std::size_t s = 0; s < prob.embb.size(); ++s) {
    const int g = c.embb_group[s];
    if (g < 0) continue;
    const auto& gi = c.groups[g];
    r.embb_covariance[s] =
        herm_from_params(x.data() + gi.offset + gi.mat_off(), n);
    r.embb_bandwidth[s] = gi.has_scalar ? x(gi.offset)
                                        : prob.embb[s].fixed_bandwidth;
    r.embb_tightness[s] = tightness_ratio(r.embb_covariance[s]);
  }
  for (std::size_t u = 0; u < prob.urllc.size(); ++u) {
    const int g = c.urllc_group[u];
    if (g < 0) continue;
    const auto& gi = c.groups[g];
    r.urllc_covariance[u] =
        herm_from_params(x.data() + gi.offset + gi.mat_off(), n);
    // activate Eq.-(24): any optimal point admits f = r(C), and shrinking f
    // only relaxes the bandwidth constraint
    const double z =
        c.urllc_zcoef[u].dot(x.segment(gi.offset + gi.mat_off(), c.np));
    r.channel_use_slack[u] =
        z > 0.0 ? psi_eval(prob.urllc[u].packet_bits, c.q2_alpha, z).value
                : x(gi.offset);
    r.urllc_tightness[u] = tightness_ratio(r.urllc_covariance[u]);
  }
  r.objective = objective_value(prob, r.embb_covariance, r.urllc_covariance);
}

}  // namespace

// ---------------------------------------------------------------------------
// Public API

void ConvexSubproblem::validate() const {
  if (params.num_bs < 1 || params.antennas_per_bs < 1)
    throw std::invalid_argument("subproblem: bad array geometry");
  if (static_cast<int>(params.bs_power.size()) != params.num_bs)
    throw std::invalid_argument("subproblem: bs_power size != num_bs");
  for (double e : params.bs_power)
    if (e <= 0.0) throw std::invalid_argument("subproblem: E_j must be > 0");
  if (params.total_bandwidth <= 0.0 || params.noise_power <= 0.0 ||
      params.snr_loss < 1.0 || params.numerology <= 0.0)
    throw std::invalid_argument("subproblem: bad system parameters");
  if (!(params.decode_error > 0.0 && params.decode_error < 1.0))
    throw std::invalid_argument("subproblem: alpha must lie in (0,1)");
  if (!(params.blocking_target > 0.0 && params.blocking_target < 1.0))
    throw std::invalid_argument("subproblem: beta must lie in (0,1)");
  const int dim = params.vector_dim();
  if (dim > 32) throw std::invalid_argument("subproblem: JK too large");
  for (const auto& e : embb) {
    if (e.accepted && e.min_rate <= 0.0)
      throw std::invalid_argument("subproblem: accepted eMBB needs R_s > 0");
    if (e.accepted && e.channels.empty())
      throw std::invalid_argument("subproblem: accepted eMBB has no UEs");
    for (const auto& h : e.channels)
      if (h.size() != dim)
        throw std::invalid_argument("subproblem: channel length != JK");
  }
  for (const auto& u : urllc) {
    if (u.channel.size() != dim)
      throw std::invalid_argument("subproblem: channel length != JK");
    if (u.accepted &&
        (u.deadline <= 0.0 || u.arrival_rate <= 0.0 || u.packet_bits <= 0.0))
      throw std::invalid_argument("subproblem: bad URLLC parameters");
  }
}

double objective_constant(const ConvexSubproblem& prob) {
  const auto& pp = prob.params;
  double esum = 0.0;
  for (double e : pp.bs_power) esum += e;
  std::set<int> urllc_slices;
  for (const auto& u : prob.urllc) urllc_slices.insert(u.slice_id);
  double c = pp.eta * esum *
             (static_cast<double>(prob.embb.size()) +
              pp.priority_weight * static_cast<double>(urllc_slices.size()));
  for (const auto& u : prob.urllc)
    if (u.accepted)
      c += pp.priority_weight * phy::urllc_profit(pp.profit_const, u.deadline);
  return c;
}

double objective_value(const ConvexSubproblem& prob,
                       const std::vector<Eigen::MatrixXcd>& embb_cov,
                       const std::vector<Eigen::MatrixXcd>& urllc_cov) {
  const auto& pp = prob.params;
  const double denom = pp.snr_loss * pp.noise_power;
  double f = objective_constant(prob);
  for (std::size_t s = 0; s < prob.embb.size(); ++s) {
    if (!prob.embb[s].accepted) continue;
    const auto& v = embb_cov.at(s);
    for (const auto& h : prob.embb[s].channels) {
      const double z = (h.adjoint() * v * h)(0, 0).real() / denom;
      f += std::log1p(std::max(z, 0.0));
    }
    f -= pp.eta * v.trace().real();
  }
  for (std::size_t u = 0; u < prob.urllc.size(); ++u) {
    if (!prob.urllc[u].accepted) continue;
    const auto& g = urllc_cov.at(u);
    const auto& h = prob.urllc[u].channel;
    const double z = (h.adjoint() * g * h)(0, 0).real() / denom;
    f += pp.priority_weight * std::log1p(std::max(z, 0.0));
    f -= pp.priority_weight * pp.eta * g.trace().real();
  }
  return f;
}

SolveResult solve(const ConvexSubproblem& prob, const SolveOptions& opt,
                  const WarmStart* warm) {
  Compiled c = compile(prob);
  SolveResult r;
  if (c.groups.empty()) {
    // nothing accepted: the zero solution is optimal
    if (c.fixed_omega_total > prob.params.total_bandwidth * (1.0 + 1e-12)) {
      r.status = SolveStatus::infeasible;
      r.max_violation = c.fixed_omega_total / prob.params.total_bandwidth - 1.0;
    } else {
      r.status = SolveStatus::optimal;
    }
    fill_result(c, Eigen::VectorXd::Zero(0), r);
    return r;
  }

  IpmCounters counters;
  const double bound = infeasibility_lower_bound(c);
  if (bound > 0.0) {
    r.status = SolveStatus::infeasible;
    r.max_violation = bound;
    fill_result(c, Eigen::VectorXd::Zero(c.nvar), r);
    return r;
  }
  Eigen::VectorXd x = construct_start(c, warm);
  Phase1Out p1;
  {
    Eval ev0 = evaluate(c, x, 0.0, false);
    if (ev0.pd && ev0.min_raw_slack >= kInteriorMargin) {
      p1.interior = true;
      p1.x = std::move(x);
    } else if (Eigen::VectorXd w; try_witness(c, w)) {
      p1.interior = true;
      p1.x = std::move(w);
    } else {
      p1 = phase1(c, std::move(x), opt, counters);
      if (!p1.interior && warm) {
        // a poor warm hint can strand phase 1; the deterministic cold start
        // is better conditioned
        p1 = phase1(c, construct_start(c, nullptr), opt, counters);
      }
    }
  }
  r.newton_iterations = counters.newton;
  r.outer_iterations = counters.outer;
  if (!p1.interior) {
    r.status = p1.iteration_cap ? SolveStatus::max_iterations
                                : SolveStatus::infeasible;
    r.max_violation = p1.violation;
    fill_result(c, p1.x, r);
    return r;
  }

  x = std::move(p1.x);
  const double theta = barrier_complexity(c);
  Eval ev = evaluate(c, x, 0.0, false);
  double t = std::max(1.0, theta / (0.1 * (1.0 + std::abs(ev.fvar))));
  double relax = 0.0;
  bool converged = false;
  for (int stage = 0; stage < opt.max_outer; ++stage) {
    ++counters.outer;
    Eval cur;
    if (!center(c, x, relax, t, false, opt, counters, cur).progressed) break;
    const double gap = theta / t;
    r.kkt_residual = gap / (1.0 + std::abs(cur.fvar));
    // the duality-gap bound holds on the central path; run a third of the
    // target so late-stage centering slack cannot spill over the tolerance
    if (gap <= 0.3 * opt.tol * (1.0 + std::abs(cur.fvar))) {
      // polish: the loose en-route centering is not enough at the exit point
      center(c, x, relax, t, false, opt, counters, cur, -1.0,
             opt.final_centering_tol);
      // eigenvalue ratios decay like 1/t along the path; when one sits in
      // the ambiguous band, push further to separate numerically-tight
      // matrices from genuinely higher-rank optima
      for (int extra = 0; extra < 2; ++extra) {
        double worst = 0.0;
        for (std::size_t g = 0; g < c.groups.size(); ++g) {
          const auto& gi = c.groups[g];
          worst = std::max(worst, tightness_ratio(herm_from_params(
                                      x.data() + gi.offset + gi.mat_off(),
                                      gi.dim)));
        }
        if (worst <= 1e-7 || worst >= 1e-2) break;
        t *= opt.barrier_growth;
        ++counters.outer;
        if (!center(c, x, relax, t, false, opt, counters, cur, -1.0,
                    opt.final_centering_tol)
                 .progressed)
          break;
        r.kkt_residual = (theta / t) / (1.0 + std::abs(cur.fvar));
      }
      converged = true;
      break;
    }
    t *= opt.barrier_growth;
  }
  r.newton_iterations = counters.newton;
  r.outer_iterations = counters.outer;
  r.status = converged ? SolveStatus::optimal : SolveStatus::max_iterations;
  fill_result(c, x, r);
  return r;
}

FeasibilityReport check_feasibility(const ConvexSubproblem& prob) {
  Compiled c = compile(prob);
  const auto& pp = prob.params;
  FeasibilityReport rep;

  if (c.groups.empty()) {
    rep.feasible =
        c.fixed_omega_total <= pp.total_bandwidth * (1.0 + 1e-12);
    rep.method = "trivial";
    if (!rep.feasible)
      rep.max_violation =
          c.fixed_omega_total / pp.total_bandwidth - 1.0;
    return rep;
  }

  const double bound = infeasibility_lower_bound(c);
  if (bound > 0.0) {
    rep.feasible = false;
    rep.method = "bound";
    rep.max_violation = bound;
    return rep;
  }

  // Sufficient witness: an explicit strictly feasible point.
  if (Eigen::VectorXd w; try_witness(c, w)) {
    rep.feasible = true;
    rep.method = "witness";
    return rep;
  }

  // Exact fallback; an undecided budget exhaustion counts as infeasible
  // (the mask oracles need a decision, and declining is the safe one)
  SolveOptions opt;
  opt.phase1_newton_budget = 500;
  IpmCounters counters;
  Phase1Out p1 = phase1(c, construct_start(c, nullptr), opt, counters);
  rep.method = p1.iteration_cap && !p1.interior ? "phase1-cap" : "phase1";
  rep.feasible = p1.interior || (!p1.iteration_cap && p1.violation < kViolationTol);
  rep.max_violation = p1.interior ? 0.0 : p1.violation;
  return rep;
}

double tightness_ratio(const Eigen::MatrixXcd& m) {
  if (m.rows() < 2) return 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(m, Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  const double l1 = ev(ev.size() - 1);
  if (l1 <= 0.0) return 0.0;
  return std::max(ev(ev.size() - 2), 0.0) / l1;
}

ExtractionResult extract_beamformer(const Eigen::MatrixXcd& m,
                                    int antennas_per_bs,
                                    const ExtractionOptions& opt) {
  const int n = static_cast<int>(m.rows());
  if (antennas_per_bs < 1 || n % antennas_per_bs != 0)
    throw std::domain_error("extract_beamformer: bad antenna grouping");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(m);
  const Eigen::VectorXd ev = es.eigenvalues();
  const double l1 = ev(n - 1);
  if (ev(0) < -1e-8 * std::max(l1, 1.0))
    throw std::domain_error("extract_beamformer: matrix is not PSD");
  ExtractionResult out;
  out.tightness = (l1 > 0.0 && n > 1) ? std::max(ev(n - 2), 0.0) / l1 : 0.0;
  if (l1 <= 0.0) {
    out.beamformer = Eigen::VectorXcd::Zero(n);
    return out;
  }
  if (out.tightness <= opt.tightness_threshold) {
    out.beamformer = std::sqrt(l1) * es.eigenvectors().col(n - 1);
    return out;
  }

  // Gaussian randomization: draw xi ~ CN(0, M), rescale each candidate to
  // the per-BS powers of M, keep the best-scoring one.
  out.randomized = true;
  Eigen::MatrixXcd half =
      es.eigenvectors() * ev.cwiseMax(0.0).cwiseSqrt().asDiagonal();
  const int nbs = n / antennas_per_bs;
  std::vector<double> cap(nbs, 0.0);
  for (int j = 0; j < nbs; ++j)
    for (int a = 0; a < antennas_per_bs; ++a)
      cap[j] += m(j * antennas_per_bs + a, j * antennas_per_bs + a).real();
  const auto score = [&](const Eigen::VectorXcd& w) {
    if (opt.score) return opt.score(w);
    return -(w * w.adjoint() - m).norm();
  };
  double best = -std::numeric_limits<double>::infinity();
  Eigen::VectorXcd best_w = Eigen::VectorXcd::Zero(n);
  Substream rng(opt.seed, kTagRandomize);
  for (int cand = 0; cand < opt.randomization_candidates; ++cand) {
    Eigen::VectorXcd z(n);
    for (int i = 0; i < n; ++i) z(i) = rng.cnormal();
    Eigen::VectorXcd xi = half * z;
    double scale = std::numeric_limits<double>::infinity();
    for (int j = 0; j < nbs; ++j) {
      const double pj = xi.segment(j * antennas_per_bs, antennas_per_bs)
                            .squaredNorm();
      if (cap[j] <= 1e-300) {
        xi.segment(j * antennas_per_bs, antennas_per_bs).setZero();
      } else if (pj > 0.0) {
        scale = std::min(scale, std::sqrt(cap[j] / pj));
      }
    }
    if (!std::isfinite(scale)) scale = 0.0;
    xi *= scale;
    const double sc = score(xi);
    if (sc > best) {
      best = sc;
      best_w = xi;
    }
  }
  out.beamformer = best_w;
  return out;
}

}  // namespace ranslicer::solver
