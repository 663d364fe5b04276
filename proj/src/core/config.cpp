#include "platoon/core/config.hpp"

#include <cmath>
#include <set>
#include <sstream>

#include <json.hpp>

#include "platoon/core/error.hpp"

namespace platoon {

using nlohmann::json;

double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

double free_space_reference_gain(double carrier_hz, double zeta) {
  return std::pow(kSpeedOfLight / (4.0 * kPi * carrier_hz), zeta);
}

double ScenarioConfig::noise_power_w() const { return dbm_to_watts(noise_power_dbm); }
double ScenarioConfig::tx_power_w() const { return dbm_to_watts(tx_power_dbm); }
double ScenarioConfig::bs_gain0() const {
  return ref_gain_bs.value_or(free_space_reference_gain(carrier_hz, zeta_bs));
}
double ScenarioConfig::ris_gain0() const {
  return ref_gain_ris.value_or(free_space_reference_gain(carrier_hz, zeta_ris));
}
double ScenarioConfig::rb_gain0() const {
  return ref_gain_rb.value_or(free_space_reference_gain(carrier_hz, zeta_rb));
}

namespace {

[[noreturn]] void schema_error(const std::string& path, const std::string& msg) {
  fail(ErrorCode::Schema, path + ": " + msg);
}

// Walks one JSON object, rejecting unknown keys once every field has been read.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) schema_error(path_, "expected an object");
  }
  ~ObjectReader() = default;

  std::string child(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  const json* find(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void number(const std::string& key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) schema_error(child(key), "expected a number");
      out = v->get<double>();
    }
  }

  void optional_number(const std::string& key, std::optional<double>& out) {
    if (const json* v = find(key)) {
      if (v->is_null()) {
        out.reset();
      } else if (v->is_number()) {
        out = v->get<double>();
      } else {
        schema_error(child(key), "expected a number or null");
      }
    }
  }

  void count(const std::string& key, std::size_t& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer() || v->get<long long>() < 0) {
        schema_error(child(key), "expected a non-negative integer");
      }
      out = v->get<std::size_t>();
    }
  }

  void u64(const std::string& key, std::uint64_t& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<long long>() >= 0)) {
        schema_error(child(key), "expected an unsigned integer");
      }
      out = v->get<std::uint64_t>();
    }
  }

  void boolean(const std::string& key, bool& out) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) schema_error(child(key), "expected a boolean");
      out = v->get<bool>();
    }
  }

  void position(const std::string& key, Position3& out) {
    if (const json* v = find(key)) {
      if (!v->is_array() || v->size() != 3) schema_error(child(key), "expected [x, y, z]");
      for (std::size_t i = 0; i < 3; ++i) {
        if (!(*v)[i].is_number()) schema_error(child(key), "expected numeric coordinates");
        out(static_cast<Eigen::Index>(i)) = (*v)[i].get<double>();
      }
    }
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) schema_error(child(it.key()), "unknown field");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_gamma(ObjectReader& parent, const std::string& key, GammaParams& g) {
  if (const json* v = parent.find(key)) {
    ObjectReader r(*v, parent.child(key));
    r.number("shape", g.shape);
    r.number("rate", g.rate);
    r.finish();
  }
}

void read_branch(ObjectReader& parent, const std::string& key, BranchHyper& b) {
  if (const json* v = parent.find(key)) {
    ObjectReader r(*v, parent.child(key));
    read_gamma(r, "active", b.active);
    read_gamma(r, "inactive", b.inactive);
    r.finish();
  }
}

json gamma_json(const GammaParams& g) { return {{"shape", g.shape}, {"rate", g.rate}}; }
json branch_json(const BranchHyper& b) {
  return {{"active", gamma_json(b.active)}, {"inactive", gamma_json(b.inactive)}};
}
json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }
json position_json(const Position3& p) { return json::array({p.x(), p.y(), p.z()}); }

ScenarioConfig parse(const json& j) {
  ScenarioConfig c;
  ObjectReader r(j, "");
  if (const json* v = r.find("schema_version")) {
    if (!v->is_number_integer() || v->get<int>() != kConfigSchemaVersion) {
      schema_error("schema_version", "unsupported schema version");
    }
  }
  r.count("M", c.M);
  r.count("K", c.K);
  r.count("N_h", c.N_h);
  r.count("N_v", c.N_v);
  r.count("U", c.U);
  r.count("T", c.T);
  r.count("S", c.S);
  r.count("G", c.G);
  r.number("grid_length", c.grid_length);
  r.number("slot_interval", c.slot_interval);
  r.number("carrier_hz", c.carrier_hz);
  r.number("noise_power_dbm", c.noise_power_dbm);
  r.number("tx_power_dbm", c.tx_power_dbm);
  if (const json* v = r.find("pathloss")) {
    ObjectReader p(*v, "pathloss");
    p.number("zeta_bs", c.zeta_bs);
    p.number("zeta_ris", c.zeta_ris);
    p.number("zeta_rb", c.zeta_rb);
    p.optional_number("ref_gain_bs", c.ref_gain_bs);
    p.optional_number("ref_gain_ris", c.ref_gain_ris);
    p.optional_number("ref_gain_rb", c.ref_gain_rb);
    p.number("rb_rician_k_db", c.rb_rician_k_db);
    p.finish();
  }
  r.position("bs_position", c.bs_position);
  r.position("ris_position", c.ris_position);
  if (const json* v = r.find("road")) {
    ObjectReader p(*v, "road");
    p.number("y", c.road_y);
    p.number("x_start", c.road_x_start);
    p.finish();
  }
  r.boolean("use_ris", c.use_ris);
  if (const json* v = r.find("ris_profile")) {
    if (!v->is_string() || (*v != "per_pilot" && *v != "fixed")) {
      schema_error("ris_profile", "expected \"per_pilot\" or \"fixed\"");
    }
    c.ris_per_pilot = (*v == "per_pilot");
  }
  if (const json* v = r.find("angle_grid")) {
    ObjectReader p(*v, "angle_grid");
    p.count("bs", c.bs_grid);
    p.count("ris_h", c.ris_grid_h);
    p.count("ris_v", c.ris_grid_v);
    p.finish();
  }
  if (const json* v = r.find("platoon")) {
    ObjectReader p(*v, "platoon");
    p.number("shape", c.platoon.shape);
    p.number("scale", c.platoon.scale);
    p.count("min_gap", c.platoon.min_gap);
    p.number("mean_speed", c.platoon.mean_speed);
    p.number("speed_std", c.platoon.speed_std);
    p.number("speed_jitter", c.platoon.speed_jitter);
    p.finish();
  }
  if (const json* v = r.find("nlos")) {
    ObjectReader p(*v, "nlos");
    p.count("paths_bs", c.nlos.paths_bs);
    p.count("paths_ris", c.nlos.paths_ris);
    p.optional_number("var_bs", c.nlos.var_bs);
    p.optional_number("var_ris", c.nlos.var_ris);
    p.number("rel_power_db", c.nlos.rel_power_db);
    p.number("corr", c.nlos.corr);
    p.finish();
  }
  if (const json* v = r.find("hyper")) {
    ObjectReader p(*v, "hyper");
    read_branch(p, "ris", c.hyper.ris);
    read_branch(p, "bs", c.hyper.bs);
    read_branch(p, "nlos", c.hyper.nlos);
    read_gamma(p, "noise", c.hyper.noise);
    read_gamma(p, "iid", c.hyper.iid);
    p.finish();
  }
  if (const json* v = r.find("algo")) {
    ObjectReader p(*v, "algo");
    p.count("r_max", c.algo.r_max);
    p.number("eps_mu_z", c.algo.eps_mu_z);
    p.number("eps_mu_v", c.algo.eps_mu_v);
    p.number("eps_sigma_z", c.algo.eps_sigma_z);
    p.number("eps_sigma_v", c.algo.eps_sigma_v);
    if (const json* a = p.find("armijo")) {
      ObjectReader q(*a, "algo.armijo");
      q.number("initial_step", c.algo.armijo.initial_step);
      q.number("contraction", c.algo.armijo.contraction);
      q.number("sufficient_increase", c.algo.armijo.sufficient_increase);
      q.count("max_backtracks", c.algo.armijo.max_backtracks);
      q.finish();
    }
    p.count("ascent_steps", c.algo.ascent_steps);
    p.count("top_p", c.algo.top_p);
    p.count("nlos_top", c.algo.nlos_top);
    p.boolean("cross_term", c.algo.cross_term);
    p.count("vbi_max_sweeps", c.algo.vbi_max_sweeps);
    p.number("vbi_tol", c.algo.vbi_tol);
    p.number("lasso_lambda_scale", c.algo.lasso_lambda_scale);
    p.count("lasso_max_iters", c.algo.lasso_max_iters);
    p.number("lasso_tol", c.algo.lasso_tol);
    p.number("map_state_cap", c.algo.map_state_cap);
    p.count("map_subcells", c.algo.map_subcells);
    p.finish();
  }
  r.u64("seed", c.seed);
  r.finish();
  validate_config(c);
  return c;
}

void require(bool ok, const std::string& path, const std::string& msg) {
  if (!ok) schema_error(path, msg);
}

void require_gamma(const GammaParams& g, const std::string& path) {
  require(g.shape > 0.0 && g.rate > 0.0, path, "Gamma parameters must be positive");
}

}  // namespace

void validate_config(const ScenarioConfig& c) {
  require(c.M >= 1, "M", "must be positive");
  require(c.K >= 1, "K", "must be positive");
  require(c.N_h >= 1, "N_h", "must be positive");
  require(c.N_v >= 1, "N_v", "must be positive");
  require(c.U >= 1, "U", "must be positive");
  require(c.T >= 1, "T", "must be positive");
  require(c.S >= 1, "S", "must be positive");
  require(c.G >= 1, "G", "must be positive");
  require(c.grid_length > 0.0, "grid_length", "must be positive");
  require(c.slot_interval > 0.0, "slot_interval", "must be positive");
  require(c.carrier_hz > 0.0, "carrier_hz", "must be positive");
  require(std::isfinite(c.noise_power_dbm), "noise_power_dbm", "must be finite");
  require(std::isfinite(c.tx_power_dbm), "tx_power_dbm", "must be finite");
  require(c.zeta_bs > 0.0, "pathloss.zeta_bs", "must be positive");
  require(c.zeta_ris > 0.0, "pathloss.zeta_ris", "must be positive");
  require(c.zeta_rb > 0.0, "pathloss.zeta_rb", "must be positive");
  require(!c.ref_gain_bs || *c.ref_gain_bs > 0.0, "pathloss.ref_gain_bs", "must be positive");
  require(!c.ref_gain_ris || *c.ref_gain_ris > 0.0, "pathloss.ref_gain_ris", "must be positive");
  require(!c.ref_gain_rb || *c.ref_gain_rb > 0.0, "pathloss.ref_gain_rb", "must be positive");
  require(c.bs_grid >= 1, "angle_grid.bs", "must be positive");
  require(c.ris_grid_h >= 1, "angle_grid.ris_h", "must be positive");
  require(c.ris_grid_v >= 1, "angle_grid.ris_v", "must be positive");
  require(c.platoon.shape >= 1.0, "platoon.shape", "must be at least 1");
  require(c.platoon.scale > 0.0, "platoon.scale", "must be positive");
  require(c.platoon.speed_std >= 0.0, "platoon.speed_std", "must be non-negative");
  require(c.platoon.speed_jitter >= 0.0, "platoon.speed_jitter", "must be non-negative");
  require(c.nlos.paths_bs <= c.bs_grid, "nlos.paths_bs", "exceeds the BS angle grid");
  require(c.nlos.paths_ris <= c.ris_grid_h * c.ris_grid_v, "nlos.paths_ris",
          "exceeds the RIS angle grid");
  require(!c.nlos.var_bs || *c.nlos.var_bs >= 0.0, "nlos.var_bs", "must be non-negative");
  require(!c.nlos.var_ris || *c.nlos.var_ris >= 0.0, "nlos.var_ris", "must be non-negative");
  require(c.nlos.corr > 0.0 && c.nlos.corr < 1.0, "nlos.corr", "must lie in (0, 1)");
  require_gamma(c.hyper.ris.active, "hyper.ris.active");
  require_gamma(c.hyper.ris.inactive, "hyper.ris.inactive");
  require_gamma(c.hyper.bs.active, "hyper.bs.active");
  require_gamma(c.hyper.bs.inactive, "hyper.bs.inactive");
  require_gamma(c.hyper.nlos.active, "hyper.nlos.active");
  require_gamma(c.hyper.nlos.inactive, "hyper.nlos.inactive");
  require_gamma(c.hyper.noise, "hyper.noise");
  require_gamma(c.hyper.iid, "hyper.iid");
  require(c.algo.r_max >= 1, "algo.r_max", "must be positive");
  require(c.algo.armijo.initial_step > 0.0, "algo.armijo.initial_step", "must be positive");
  require(c.algo.armijo.contraction > 0.0 && c.algo.armijo.contraction < 1.0,
          "algo.armijo.contraction", "must lie in (0, 1)");
  require(c.algo.armijo.sufficient_increase > 0.0 && c.algo.armijo.sufficient_increase < 1.0,
          "algo.armijo.sufficient_increase", "must lie in (0, 1)");
  require(c.algo.vbi_max_sweeps >= 1, "algo.vbi_max_sweeps", "must be positive");
  require(c.algo.vbi_tol > 0.0, "algo.vbi_tol", "must be positive");
  require(c.algo.lasso_lambda_scale >= 0.0, "algo.lasso_lambda_scale", "must be non-negative");
  require(c.algo.map_state_cap >= 1.0, "algo.map_state_cap", "must be at least 1");
  require(c.algo.map_subcells >= 1, "algo.map_subcells", "must be positive");
}

ScenarioConfig config_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::Schema, std::string("config is not valid JSON: ") + e.what());
  }
  return parse(j);
}

std::string config_to_json_text(const ScenarioConfig& c) {
  json j;
  j["schema_version"] = c.schema_version;
  j["M"] = c.M;
  j["K"] = c.K;
  j["N_h"] = c.N_h;
  j["N_v"] = c.N_v;
  j["U"] = c.U;
  j["T"] = c.T;
  j["S"] = c.S;
  j["G"] = c.G;
  j["grid_length"] = c.grid_length;
  j["slot_interval"] = c.slot_interval;
  j["carrier_hz"] = c.carrier_hz;
  j["noise_power_dbm"] = c.noise_power_dbm;
  j["tx_power_dbm"] = c.tx_power_dbm;
  j["pathloss"] = {{"zeta_bs", c.zeta_bs},
                   {"zeta_ris", c.zeta_ris},
                   {"zeta_rb", c.zeta_rb},
                   {"ref_gain_bs", optional_json(c.ref_gain_bs)},
                   {"ref_gain_ris", optional_json(c.ref_gain_ris)},
                   {"ref_gain_rb", optional_json(c.ref_gain_rb)},
                   {"rb_rician_k_db", c.rb_rician_k_db}};
  j["bs_position"] = position_json(c.bs_position);
  j["ris_position"] = position_json(c.ris_position);
  j["road"] = {{"y", c.road_y}, {"x_start", c.road_x_start}};
  j["use_ris"] = c.use_ris;
  j["ris_profile"] = c.ris_per_pilot ? "per_pilot" : "fixed";
  j["angle_grid"] = {{"bs", c.bs_grid}, {"ris_h", c.ris_grid_h}, {"ris_v", c.ris_grid_v}};
  j["platoon"] = {{"shape", c.platoon.shape},
                  {"scale", c.platoon.scale},
                  {"min_gap", c.platoon.min_gap},
                  {"mean_speed", c.platoon.mean_speed},
                  {"speed_std", c.platoon.speed_std},
                  {"speed_jitter", c.platoon.speed_jitter}};
  j["nlos"] = {{"paths_bs", c.nlos.paths_bs},
               {"paths_ris", c.nlos.paths_ris},
               {"var_bs", optional_json(c.nlos.var_bs)},
               {"var_ris", optional_json(c.nlos.var_ris)},
               {"rel_power_db", c.nlos.rel_power_db},
               {"corr", c.nlos.corr}};
  j["hyper"] = {{"ris", branch_json(c.hyper.ris)},
                {"bs", branch_json(c.hyper.bs)},
                {"nlos", branch_json(c.hyper.nlos)},
                {"noise", gamma_json(c.hyper.noise)},
                {"iid", gamma_json(c.hyper.iid)}};
  const AlgoParams& a = c.algo;
  j["algo"] = {{"r_max", a.r_max},
               {"eps_mu_z", a.eps_mu_z},
               {"eps_mu_v", a.eps_mu_v},
               {"eps_sigma_z", a.eps_sigma_z},
               {"eps_sigma_v", a.eps_sigma_v},
               {"armijo",
                {{"initial_step", a.armijo.initial_step},
                 {"contraction", a.armijo.contraction},
                 {"sufficient_increase", a.armijo.sufficient_increase},
                 {"max_backtracks", a.armijo.max_backtracks}}},
               {"ascent_steps", a.ascent_steps},
               {"top_p", a.top_p},
               {"nlos_top", a.nlos_top},
               {"cross_term", a.cross_term},
               {"vbi_max_sweeps", a.vbi_max_sweeps},
               {"vbi_tol", a.vbi_tol},
               {"lasso_lambda_scale", a.lasso_lambda_scale},
               {"lasso_max_iters", a.lasso_max_iters},
               {"lasso_tol", a.lasso_tol},
               {"map_state_cap", a.map_state_cap},
               {"map_subcells", a.map_subcells}};
  j["seed"] = c.seed;
  return j.dump(2) + "\n";
}

void calibrate_reference_gains(ScenarioConfig& c, double snr_bs_db, double snr_ris_db) {
  const Position3 center(c.road_x_start + c.grid_length * static_cast<double>(c.U - 1) / 2.0,
                         c.road_y, 0.0);
  const double sigma2 = c.noise_power_w();
  const double power = c.tx_power_w();
  const double d_rb = (c.bs_position - c.ris_position).norm();
  c.ref_gain_rb = std::pow(d_rb, c.zeta_rb);
  const double beta = std::sqrt(std::pow(10.0, snr_bs_db / 10.0) * sigma2 / power);
  c.ref_gain_bs = beta * std::pow((center - c.bs_position).norm(), c.zeta_bs);
  const double eta = std::sqrt(std::pow(10.0, snr_ris_db / 10.0) * sigma2 /
                               (power * static_cast<double>(c.N())));
  c.ref_gain_ris = eta * std::pow((center - c.ris_position).norm(), c.zeta_ris);
}

namespace {

void use_concentrated_inactive_prior(ScenarioConfig& c) {
  const GammaParams inactive{100.0, 1e-4};
  c.hyper.ris.inactive = inactive;
  c.hyper.bs.inactive = inactive;
  c.hyper.nlos.inactive = inactive;
}

}  // namespace

ScenarioConfig preset_config(const std::string& name) {
  ScenarioConfig c;
  if (name == "default") {
    calibrate_reference_gains(c, 15.0, 15.0);
    return c;
  }
  if (name == "full") {
    c.U = 220;
    c.road_x_start = -20.0;
    use_concentrated_inactive_prior(c);
    calibrate_reference_gains(c, 15.0, 15.0);
    return c;
  }
  if (name == "desk") {
    c.M = 2;
    c.K = 8;
    c.N_h = 4;
    c.N_v = 4;
    c.U = 20;
    c.T = 20;
    c.S = 20;
    c.bs_grid = 8;
    c.ris_grid_h = 4;
    c.ris_grid_v = 4;
    c.road_x_start = 90.0;
    c.platoon.min_gap = 1;
    c.platoon.mean_speed = -3.0;
    c.platoon.speed_std = 2.0;
    c.platoon.speed_jitter = 0.3;
    c.bs_position = Position3(95.0, 65.0, 10.0);
    c.ris_position = Position3(105.0, 35.0, 10.0);
    use_concentrated_inactive_prior(c);
    calibrate_reference_gains(c, 25.0, 25.0);
    return c;
  }
  fail(ErrorCode::InvalidArgument, "unknown preset '" + name + "'");
}

}  // namespace platoon
