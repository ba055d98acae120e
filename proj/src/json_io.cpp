#include "ranslicer/json_io.hpp"

#include <set>
#include <stdexcept>

namespace ranslicer::json_io {

namespace {

using nlohmann::json;

void expect_keys(const json& j, const std::set<std::string>& allowed,
                 const std::string& where) {
  if (!j.is_object())
    throw std::invalid_argument(where + ": expected an object");
  for (const auto& [key, _] : j.items())
    if (!allowed.count(key))
      throw std::invalid_argument(where + ": unknown field '" + key + "'");
}

template <typename T>
T get_or(const json& j, const std::string& key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

std::vector<double> power_list(const json& j, int num_bs) {
  if (j.is_number()) return std::vector<double>(num_bs, j.get<double>());
  return j.get<std::vector<double>>();
}

Eigen::VectorXcd cvec_from_json(const json& j) {
  Eigen::VectorXcd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& e = j.at(i);
    if (!e.is_array() || e.size() != 2)
      throw std::invalid_argument("complex entry must be [re, im]");
    v(i) = std::complex<double>(e.at(0).get<double>(), e.at(1).get<double>());
  }
  return v;
}

json cvec_to_json(const Eigen::VectorXcd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i)
    out.push_back({v(i).real(), v(i).imag()});
  return out;
}

json cmat_to_json(const Eigen::MatrixXcd& m) {
  json out = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      row.push_back({m(r, c).real(), m(r, c).imag()});
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace

harness::Scenario scenario_from_json(const json& j) {
  expect_keys(j,
              {"topology", "system", "embb_slices", "urllc_slices", "algorithm",
               "mode", "seed", "sample_cap", "sample_override", "sweep"},
              "scenario");
  harness::Scenario sc;

  const auto& t = j.at("topology");
  expect_keys(t,
              {"region_radius_km", "num_bs", "antennas_per_bs",
               "antenna_gain_db", "shadowing_std_db", "noise_power_w",
               "snr_loss"},
              "topology");
  sc.topology.region_radius_km = get_or(t, "region_radius_km", 0.5);
  sc.topology.num_bs = get_or(t, "num_bs", 3);
  sc.topology.antennas_per_bs = get_or(t, "antennas_per_bs", 2);
  sc.topology.antenna_gain_db = get_or(t, "antenna_gain_db", 5.0);
  sc.topology.shadowing_std_db = get_or(t, "shadowing_std_db", 10.0);
  sc.topology.noise_power_w = get_or(t, "noise_power_w", 1e-14);
  sc.topology.snr_loss = get_or(t, "snr_loss", 1.5);

  const auto& s = j.at("system");
  expect_keys(s,
              {"total_bandwidth_hz", "bs_power_w", "numerology", "efficiency",
               "priority_weight", "urllc_profit_const", "outage_prob",
               "sample_confidence", "minislots", "snr_case", "min_snr"},
              "system");
  sc.sys.total_bandwidth = get_or(s, "total_bandwidth_hz", 10e6);
  sc.sys.bs_power = s.contains("bs_power_w")
                        ? power_list(s.at("bs_power_w"), sc.topology.num_bs)
                        : std::vector<double>(sc.topology.num_bs, 1.0);
  sc.sys.numerology = get_or(s, "numerology", 0.032);
  sc.sys.efficiency = get_or(s, "efficiency", 100.0);
  sc.sys.priority_weight = get_or(s, "priority_weight", 1.0);
  sc.sys.profit_const = get_or(s, "urllc_profit_const", 0.1);
  sc.sys.outage_prob = get_or(s, "outage_prob", 0.5);
  sc.sys.sample_confidence = get_or(s, "sample_confidence", 0.5);
  sc.sys.minislots = get_or(s, "minislots", 60);
  const std::string snr_case = get_or<std::string>(s, "snr_case", "I");
  if (snr_case == "I")
    sc.sys.snr_case = solver::SnrCase::enforced;
  else if (snr_case == "II")
    sc.sys.snr_case = solver::SnrCase::relaxed;
  else
    throw std::invalid_argument("scenario: snr_case must be I or II");
  sc.sys.min_snr = get_or(s, "min_snr", 5.0);

  for (const auto& e : j.value("embb_slices", json::array())) {
    expect_keys(e, {"id", "num_ues", "min_rate_bps"}, "embb slice");
    sc.embb.push_back({e.at("id").get<int>(), e.at("num_ues").get<int>(),
                       e.at("min_rate_bps").get<double>()});
  }
  for (const auto& u : j.value("urllc_slices", json::array())) {
    expect_keys(u,
                {"id", "num_ues", "deadline_s", "decode_error",
                 "blocking_target", "arrival_rate", "packet_bits"},
                "urllc slice");
    sc.urllc.push_back({u.at("id").get<int>(), u.at("num_ues").get<int>(),
                        u.at("deadline_s").get<double>(),
                        get_or(u, "decode_error", 2e-8),
                        get_or(u, "blocking_target", 1e-6),
                        get_or(u, "arrival_rate", 0.1),
                        get_or(u, "packet_bits", 160.0)});
  }
  sc.algorithm =
      harness::algorithm_from_name(get_or<std::string>(j, "algorithm", "iara-ab"));
  const std::string mode = get_or<std::string>(j, "mode", "multicast");
  if (mode == "multicast")
    sc.mode = harness::ServiceMode::multicast;
  else if (mode == "unicast")
    sc.mode = harness::ServiceMode::unicast;
  else
    throw std::invalid_argument("scenario: mode must be multicast or unicast");
  sc.seed = get_or<std::uint64_t>(j, "seed", 1);
  sc.sample_cap = get_or(j, "sample_cap", 50);
  if (j.contains("sample_override"))
    sc.sample_override = j.at("sample_override").get<int>();
  if (j.contains("sweep")) {
    const auto& w = j.at("sweep");
    expect_keys(w, {"param", "grid"}, "sweep");
    sc.sweep_param = w.at("param").get<std::string>();
    for (const auto& g : w.at("grid"))
      sc.sweep_grid.push_back(g.is_string() ? g.get<std::string>()
                                            : json(g).dump());
  }
  sc.validate();
  return sc;
}

json scenario_to_json(const harness::Scenario& sc) {
  json j;
  j["topology"] = {{"region_radius_km", sc.topology.region_radius_km},
                   {"num_bs", sc.topology.num_bs},
                   {"antennas_per_bs", sc.topology.antennas_per_bs},
                   {"antenna_gain_db", sc.topology.antenna_gain_db},
                   {"shadowing_std_db", sc.topology.shadowing_std_db},
                   {"noise_power_w", sc.topology.noise_power_w},
                   {"snr_loss", sc.topology.snr_loss}};
  j["system"] = {
      {"total_bandwidth_hz", sc.sys.total_bandwidth},
      {"bs_power_w", sc.sys.bs_power},
      {"numerology", sc.sys.numerology},
      {"efficiency", sc.sys.efficiency},
      {"priority_weight", sc.sys.priority_weight},
      {"urllc_profit_const", sc.sys.profit_const},
      {"outage_prob", sc.sys.outage_prob},
      {"sample_confidence", sc.sys.sample_confidence},
      {"minislots", sc.sys.minislots},
      {"snr_case", sc.sys.snr_case == solver::SnrCase::enforced ? "I" : "II"},
      {"min_snr", sc.sys.min_snr}};
  j["embb_slices"] = json::array();
  for (const auto& e : sc.embb)
    j["embb_slices"].push_back(
        {{"id", e.id}, {"num_ues", e.num_ues}, {"min_rate_bps", e.min_rate}});
  j["urllc_slices"] = json::array();
  for (const auto& u : sc.urllc)
    j["urllc_slices"].push_back({{"id", u.id},
                                 {"num_ues", u.num_ues},
                                 {"deadline_s", u.deadline},
                                 {"decode_error", u.decode_error},
                                 {"blocking_target", u.blocking_target},
                                 {"arrival_rate", u.arrival_rate},
                                 {"packet_bits", u.packet_bits}});
  j["algorithm"] = harness::algorithm_name(sc.algorithm);
  j["mode"] = sc.mode == harness::ServiceMode::unicast ? "unicast" : "multicast";
  j["seed"] = sc.seed;
  j["sample_cap"] = sc.sample_cap;
  if (sc.sample_override) j["sample_override"] = *sc.sample_override;
  if (!sc.sweep_param.empty())
    j["sweep"] = {{"param", sc.sweep_param}, {"grid", sc.sweep_grid}};
  return j;
}

channel::Topology topology_from_json(const json& j) {
  expect_keys(j,
              {"region_radius_km", "antennas_per_bs", "antenna_gain_db",
               "shadowing_std_db", "noise_power_w", "snr_loss", "bs_positions",
               "ue_groups"},
              "topology");
  channel::Topology t;
  t.region_radius_km = get_or(j, "region_radius_km", 0.5);
  t.antennas_per_bs = get_or(j, "antennas_per_bs", 2);
  t.antenna_gain_db = get_or(j, "antenna_gain_db", 5.0);
  t.shadowing_std_db = get_or(j, "shadowing_std_db", 10.0);
  t.noise_power_w = get_or(j, "noise_power_w", 1e-14);
  t.snr_loss = get_or(j, "snr_loss", 1.5);
  for (const auto& p : j.at("bs_positions"))
    t.bs_positions.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
  for (const auto& g : j.value("ue_groups", json::array())) {
    expect_keys(g, {"slice_id", "positions"}, "ue group");
    channel::UeGroup ug;
    ug.slice_id = g.at("slice_id").get<std::string>();
    for (const auto& p : g.at("positions"))
      ug.positions.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    t.ue_groups.push_back(std::move(ug));
  }
  t.validate();
  return t;
}

json topology_to_json(const channel::Topology& t) {
  json j;
  j["region_radius_km"] = t.region_radius_km;
  j["antennas_per_bs"] = t.antennas_per_bs;
  j["antenna_gain_db"] = t.antenna_gain_db;
  j["shadowing_std_db"] = t.shadowing_std_db;
  j["noise_power_w"] = t.noise_power_w;
  j["snr_loss"] = t.snr_loss;
  j["bs_positions"] = json::array();
  for (const auto& p : t.bs_positions) j["bs_positions"].push_back({p.x, p.y});
  j["ue_groups"] = json::array();
  for (const auto& g : t.ue_groups) {
    json jg;
    jg["slice_id"] = g.slice_id;
    jg["positions"] = json::array();
    for (const auto& p : g.positions) jg["positions"].push_back({p.x, p.y});
    j["ue_groups"].push_back(std::move(jg));
  }
  return j;
}

queueing::BlockingScenario blocking_from_json(const json& j) {
  expect_keys(j, {"reserved_bandwidth", "slices"}, "blocking scenario");
  queueing::BlockingScenario sc;
  sc.reserved_bandwidth = j.at("reserved_bandwidth").get<double>();
  for (const auto& s : j.at("slices")) {
    expect_keys(s, {"id", "num_ues", "arrival_rate", "duration", "bandwidth"},
                "blocking slice");
    sc.slices.push_back({get_or<std::string>(s, "id", ""),
                         get_or(s, "num_ues", 1),
                         s.at("arrival_rate").get<double>(),
                         s.at("duration").get<double>(),
                         s.at("bandwidth").get<double>()});
  }
  sc.validate();
  return sc;
}

json blocking_to_json(const queueing::BlockingScenario& sc) {
  json j;
  j["reserved_bandwidth"] = sc.reserved_bandwidth;
  j["slices"] = json::array();
  for (const auto& s : sc.slices)
    j["slices"].push_back({{"id", s.id},
                           {"num_ues", s.num_ues},
                           {"arrival_rate", s.per_ue_arrival_rate},
                           {"duration", s.duration},
                           {"bandwidth", s.bandwidth}});
  return j;
}

solver::ConvexSubproblem subproblem_from_json(const json& j) {
  expect_keys(j, {"params", "embb", "urllc"}, "subproblem");
  solver::ConvexSubproblem p;
  const auto& pp = j.at("params");
  expect_keys(pp,
              {"num_bs", "antennas_per_bs", "total_bandwidth", "bs_power",
               "noise_power", "snr_loss", "eta", "priority_weight",
               "profit_const", "numerology", "decode_error", "blocking_target",
               "min_snr", "snr_case", "reservation"},
              "subproblem params");
  p.params.num_bs = get_or(pp, "num_bs", 3);
  p.params.antennas_per_bs = get_or(pp, "antennas_per_bs", 2);
  p.params.total_bandwidth = get_or(pp, "total_bandwidth", 10e6);
  p.params.bs_power = pp.contains("bs_power")
                          ? power_list(pp.at("bs_power"), p.params.num_bs)
                          : std::vector<double>(p.params.num_bs, 1.0);
  p.params.noise_power = get_or(pp, "noise_power", 1e-14);
  p.params.snr_loss = get_or(pp, "snr_loss", 1.5);
  p.params.eta = get_or(pp, "eta", 100.0);
  p.params.priority_weight = get_or(pp, "priority_weight", 1.0);
  p.params.profit_const = get_or(pp, "profit_const", 0.1);
  p.params.numerology = get_or(pp, "numerology", 0.032);
  p.params.decode_error = get_or(pp, "decode_error", 2e-8);
  p.params.blocking_target = get_or(pp, "blocking_target", 1e-6);
  p.params.min_snr = get_or(pp, "min_snr", 5.0);
  const std::string snr_case = get_or<std::string>(pp, "snr_case", "I");
  p.params.snr_case =
      snr_case == "II" ? solver::SnrCase::relaxed : solver::SnrCase::enforced;
  const std::string resv = get_or<std::string>(pp, "reservation", "staffed");
  if (resv == "staffed")
    p.params.reservation = solver::Reservation::staffed;
  else if (resv == "mean_only")
    p.params.reservation = solver::Reservation::mean_only;
  else if (resv == "continuous")
    p.params.reservation = solver::Reservation::continuous;
  else
    throw std::invalid_argument("subproblem: unknown reservation " + resv);

  for (const auto& e : j.value("embb", json::array())) {
    expect_keys(e, {"slice_id", "accepted", "min_rate", "fixed_bandwidth",
                    "channels"},
                "subproblem embb");
    solver::EmbbGroup g;
    g.slice_id = get_or(e, "slice_id", 0);
    g.accepted = get_or(e, "accepted", true);
    g.min_rate = get_or(e, "min_rate", 1e6);
    g.fixed_bandwidth = get_or(e, "fixed_bandwidth", -1.0);
    for (const auto& hv : e.at("channels")) g.channels.push_back(cvec_from_json(hv));
    p.embb.push_back(std::move(g));
  }
  for (const auto& u : j.value("urllc", json::array())) {
    expect_keys(u, {"slice_id", "ue_id", "accepted", "deadline",
                    "arrival_rate", "packet_bits", "channel"},
                "subproblem urllc");
    solver::UrllcUser q;
    q.slice_id = get_or(u, "slice_id", 0);
    q.ue_id = get_or(u, "ue_id", 0);
    q.accepted = get_or(u, "accepted", true);
    q.deadline = get_or(u, "deadline", 1e-3);
    q.arrival_rate = get_or(u, "arrival_rate", 0.1);
    q.packet_bits = get_or(u, "packet_bits", 160.0);
    q.channel = cvec_from_json(u.at("channel"));
    p.urllc.push_back(std::move(q));
  }
  p.validate();
  return p;
}

json subproblem_to_json(const solver::ConvexSubproblem& p) {
  json j;
  j["params"] = {
      {"num_bs", p.params.num_bs},
      {"antennas_per_bs", p.params.antennas_per_bs},
      {"total_bandwidth", p.params.total_bandwidth},
      {"bs_power", p.params.bs_power},
      {"noise_power", p.params.noise_power},
      {"snr_loss", p.params.snr_loss},
      {"eta", p.params.eta},
      {"priority_weight", p.params.priority_weight},
      {"profit_const", p.params.profit_const},
      {"numerology", p.params.numerology},
      {"decode_error", p.params.decode_error},
      {"blocking_target", p.params.blocking_target},
      {"min_snr", p.params.min_snr},
      {"snr_case", p.params.snr_case == solver::SnrCase::relaxed ? "II" : "I"},
      {"reservation",
       p.params.reservation == solver::Reservation::staffed      ? "staffed"
       : p.params.reservation == solver::Reservation::mean_only ? "mean_only"
                                                                 : "continuous"}};
  j["embb"] = json::array();
  for (const auto& e : p.embb) {
    json je = {{"slice_id", e.slice_id},
               {"accepted", e.accepted},
               {"min_rate", e.min_rate},
               {"fixed_bandwidth", e.fixed_bandwidth}};
    je["channels"] = json::array();
    for (const auto& h : e.channels) je["channels"].push_back(cvec_to_json(h));
    j["embb"].push_back(std::move(je));
  }
  j["urllc"] = json::array();
  for (const auto& u : p.urllc)
    j["urllc"].push_back({{"slice_id", u.slice_id},
                          {"ue_id", u.ue_id},
                          {"accepted", u.accepted},
                          {"deadline", u.deadline},
                          {"arrival_rate", u.arrival_rate},
                          {"packet_bits", u.packet_bits},
                          {"channel", cvec_to_json(u.channel)}});
  return j;
}

json solve_result_to_json(const solver::SolveResult& r) {
  json j;
  j["status"] = r.status == solver::SolveStatus::optimal ? "optimal"
                : r.status == solver::SolveStatus::infeasible
                    ? "infeasible"
                    : "max_iterations";
  j["objective"] = r.objective;
  j["embb_bandwidth"] = r.embb_bandwidth;
  j["channel_use_slack"] = r.channel_use_slack;
  j["embb_tightness"] = r.embb_tightness;
  j["urllc_tightness"] = r.urllc_tightness;
  j["kkt_residual"] = r.kkt_residual;
  j["max_violation"] = r.max_violation;
  j["newton_iterations"] = r.newton_iterations;
  j["outer_iterations"] = r.outer_iterations;
  j["embb_covariance"] = json::array();
  for (const auto& m : r.embb_covariance)
    j["embb_covariance"].push_back(cmat_to_json(m));
  j["urllc_covariance"] = json::array();
  for (const auto& m : r.urllc_covariance)
    j["urllc_covariance"].push_back(cmat_to_json(m));
  return j;
}

}  // namespace ranslicer::json_io
