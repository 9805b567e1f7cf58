#pragma once

#include <cmath>
#include <cstddef>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "jointsched/demand.hpp"
#include "jointsched/error.hpp"
#include "jointsched/loss_model.hpp"

namespace jointsched {

/// U(r) = weight * log(r) + offset.
struct Utility {
  double offset = 0.0;
  double weight = 1.0;

  double value(double r) const { return weight * std::log(r) + offset; }
  double derivative(double r) const { return weight / r; }

  friend bool operator==(const Utility&, const Utility&) = default;
};

/// Per-user, per-state shares, indexed [user][state].
template <typename Tag>
class ShareMatrix {
 public:
  ShareMatrix() = default;
  ShareMatrix(std::size_t users, std::size_t states, double fill = 0.0)
      : rows_(users, std::vector<double>(states, fill)) {}
  explicit ShareMatrix(std::vector<std::vector<double>> rows) : rows_(std::move(rows)) {}

  std::size_t users() const noexcept { return rows_.size(); }
  std::size_t states() const noexcept { return rows_.empty() ? 0 : rows_.front().size(); }

  double& operator()(std::size_t u, std::size_t s) { return rows_[u][s]; }
  double operator()(std::size_t u, std::size_t s) const { return rows_[u][s]; }

  /// Shares of every user in state s.
  std::vector<double> column(std::size_t s) const {
    std::vector<double> out(rows_.size());
    for (std::size_t u = 0; u < rows_.size(); ++u) out[u] = rows_[u][s];
    return out;
  }
  void set_column(std::size_t s, std::span<const double> col) {
    for (std::size_t u = 0; u < rows_.size(); ++u) rows_[u][s] = col[u];
  }

  const std::vector<std::vector<double>>& rows() const noexcept { return rows_; }

  friend bool operator==(const ShareMatrix&, const ShareMatrix&) = default;

 private:
  std::vector<std::vector<double>> rows_;
};

struct AllocationTag;
struct PlacementTag;
/// phi[u][s]: fraction of slot resources held by user u in state s.
using AllocationMatrix = ShareMatrix<AllocationTag>;
/// gamma[u][s]: URLLC placement factor of user u in state s.
using PlacementMatrix = ShareMatrix<PlacementTag>;

/// Whole-system description shared read-only by every component.
struct SystemConfig {
  std::size_t num_users = 0;
  std::size_t num_states = 0;
  std::size_t num_minislots = 8;
  double delta = 0.3;
  std::size_t rb_count = 100;
  std::vector<double> state_probs;
  std::vector<std::vector<double>> peak_rates;  // [user][state], Mbps
  std::vector<Utility> utilities;
  std::vector<LossModel> loss_models;
  DemandSpec demand = BinomialMinislot{};

  double minislot_fraction() const { return 1.0 / static_cast<double>(num_minislots); }
  DemandLaw demand_law() const { return DemandLaw(demand, num_minislots, delta); }

  friend bool operator==(const SystemConfig&, const SystemConfig&) = default;
};

/// One broken invariant.
struct Violation {
  std::string field;
  std::string constraint;
};

/// Row-level joint feasibility: both rows are distributions and
/// (1 - delta) gamma <= phi, all within kFeasibilityTol.
inline bool jointly_feasible(std::span<const double> phi, std::span<const double> gamma,
                             double delta, double tol = kFeasibilityTol) {
  if (phi.size() != gamma.size()) throw Error("phi and gamma rows differ in length");
  double sp = 0.0, sg = 0.0;
  for (std::size_t u = 0; u < phi.size(); ++u) {
    if (phi[u] < -tol || phi[u] > 1.0 + tol || gamma[u] < -tol || gamma[u] > 1.0 + tol)
      return false;
    if ((1.0 - delta) * gamma[u] > phi[u] + tol) return false;
    sp += phi[u];
    sg += gamma[u];
  }
  return std::abs(sp - 1.0) <= tol && std::abs(sg - 1.0) <= tol;
}

inline bool check_joint_feasibility(const AllocationMatrix& phi, const PlacementMatrix& gamma,
                                    double delta) {
  if (phi.users() != gamma.users() || phi.states() != gamma.states())
    throw Error("allocation and placement matrices differ in shape");
  for (std::size_t s = 0; s < phi.states(); ++s)
    if (!jointly_feasible(phi.column(s), gamma.column(s), delta)) return false;
  return true;
}

namespace detail {

inline void check_loss_model(const LossModel& m, std::size_t num_states, const std::string& field,
                             std::vector<Violation>& out) {
  const auto& fam = m.family();
  const std::size_t before = out.size();
  if (auto* mono = std::get_if<Monomial>(&fam)) {
    if (!(mono->k >= 0.0)) out.push_back({field + ".k", "must be >= 0"});
    if (!(mono->q >= 1.0)) out.push_back({field + ".q", "must be >= 1"});
  } else if (auto* e = std::get_if<Exponential>(&fam)) {
    if (!(e->kappa > 0.0)) out.push_back({field + ".kappa", "must be > 0"});
  } else if (auto* pq = std::get_if<PiecewiseQuadratic>(&fam)) {
    if (!(pq->tau > 0.0 && pq->tau <= 1.0)) out.push_back({field + ".tau", "must lie in (0,1]"});
  } else if (auto* t = std::get_if<Threshold>(&fam)) {
    if (!t->fn) {
      if (t->alpha.size() != 1 && t->alpha.size() != num_states)
        out.push_back({field + ".alpha", "needs one entry or one per state"});
      for (double a : t->alpha)
        if (!(a >= 0.0 && a <= 1.0)) out.push_back({field + ".alpha", "entries must lie in [0,1]"});
    }
    return;
  }
  if (out.size() != before) return;
  // h maps [0,1] into [0,1] and is non-decreasing; the literal reading of the
  // piecewise model is exempt from monotonicity.
  const auto* pq = std::get_if<PiecewiseQuadratic>(&fam);
  const bool literal = pq != nullptr && pq->paper_literal;
  double prev = -1.0;
  for (int i = 0; i <= 200; ++i) {
    const double v = m.h(i / 200.0);
    if (!(v >= -1e-12 && v <= 1.0 + 1e-12)) {
      out.push_back({field, "h must map [0,1] into [0,1]"});
      return;
    }
    if (!literal && v < prev - 1e-12) {
      out.push_back({field, "h must be non-decreasing"});
      return;
    }
    prev = v;
  }
}

}  // namespace detail

/// Every invariant the configuration breaks; empty means valid.
inline std::vector<Violation> validate_config(const SystemConfig& cfg) {
  std::vector<Violation> out;
  const std::size_t U = cfg.num_users, S = cfg.num_states;
  if (U == 0) out.push_back({"users", "must be positive"});
  if (S == 0) out.push_back({"states", "must be positive"});
  if (cfg.num_minislots == 0) out.push_back({"minislots", "must be positive"});
  if (cfg.rb_count == 0) out.push_back({"rb_count", "must be positive"});
  if (!(cfg.delta > 0.0 && cfg.delta < 1.0)) out.push_back({"delta", "delta outside (0,1)"});

  if (cfg.state_probs.size() != S) {
    out.push_back({"state_probs", "length must equal states"});
  } else {
    double sum = 0.0;
    bool negative = false;
    for (double p : cfg.state_probs) {
      negative |= !(p >= 0.0);
      sum += p;
    }
    if (negative) out.push_back({"state_probs", "entries must be non-negative"});
    if (!(std::abs(sum - 1.0) <= kProbabilitySumTol))
      out.push_back({"state_probs", "state_probs sum != 1"});
  }

  if (cfg.peak_rates.size() != U) {
    out.push_back({"peak_rates", "needs one row per user"});
  } else {
    for (std::size_t u = 0; u < U; ++u) {
      if (cfg.peak_rates[u].size() != S) {
        out.push_back({"peak_rates[" + std::to_string(u) + "]", "needs one entry per state"});
        continue;
      }
      for (double r : cfg.peak_rates[u])
        if (!(r >= 0.0) || !std::isfinite(r)) {
          out.push_back({"peak_rates[" + std::to_string(u) + "]", "rates must be finite and >= 0"});
          break;
        }
    }
  }

  if (cfg.utilities.size() != U) out.push_back({"utilities", "needs one entry per user"});
  for (std::size_t u = 0; u < cfg.utilities.size(); ++u)
    if (!(cfg.utilities[u].weight > 0.0))
      out.push_back({"utilities[" + std::to_string(u) + "].weight", "must be positive"});

  if (cfg.loss_models.size() != U) out.push_back({"loss_models", "needs one entry per user"});
  for (std::size_t u = 0; u < cfg.loss_models.size(); ++u)
    detail::check_loss_model(cfg.loss_models[u], S, "loss_models[" + std::to_string(u) + "]", out);

  if (cfg.num_minislots > 0 && cfg.delta > 0.0 && cfg.delta < 1.0) {
    try {
      DemandLaw law = cfg.demand_law();
      const double cap = law.minislot_cap();
      if (auto* d = std::get_if<DiscreteMinislot>(&cfg.demand)) {
        for (double v : d->values)
          if (v > cap + 1e-12) {
            out.push_back({"demand.values", "minislot demand exceeds f(1-delta)"});
            break;
          }
      } else if (auto* e = std::get_if<EmpiricalAggregate>(&cfg.demand)) {
        for (double v : e->values)
          if (v > 1.0 - cfg.delta + 1e-12) {
            out.push_back({"demand.values", "aggregate demand exceeds 1-delta"});
            break;
          }
      }
    } catch (const ConfigError& e) {
      out.push_back({e.field(), e.constraint()});
    }
  }
  return out;
}

/// Throws ConfigError naming the first violation.
inline void require_valid(const SystemConfig& cfg) {
  auto v = validate_config(cfg);
  if (!v.empty()) throw ConfigError(v.front().field, v.front().constraint);
}

// ---------------------------------------------------------------------------
// JSON

inline void to_json(nlohmann::json& j, const Utility& u) {
  j = nlohmann::json{{"kind", "log"}, {"offset", u.offset}};
  if (u.weight != 1.0) j["weight"] = u.weight;
}

inline void from_json(const nlohmann::json& j, Utility& u) {
  if (j.is_number()) {
    u = Utility{j.get<double>(), 1.0};
    return;
  }
  if (j.contains("kind") && j.at("kind").get<std::string>() != "log")
    throw ConfigError("utilities.kind", "only log utilities are supported");
  u.offset = j.value("offset", 0.0);
  u.weight = j.value("weight", 1.0);
}

inline void to_json(nlohmann::json& j, const LossModel& m) {
  std::visit(
      [&j](const auto& f) {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, Linear>) {
          j = {{"kind", "linear"}};
        } else if constexpr (std::is_same_v<T, Monomial>) {
          j = {{"kind", "monomial"}, {"k", f.k}, {"q", f.q}};
        } else if constexpr (std::is_same_v<T, Exponential>) {
          j = {{"kind", "exponential"}, {"kappa", f.kappa}};
        } else if constexpr (std::is_same_v<T, PiecewiseQuadratic>) {
          j = {{"kind", "piecewise_quadratic"}, {"tau", f.tau}};
          if (f.paper_literal) j["paper_literal"] = true;
        } else {
          if (f.fn) throw Error("threshold functions cannot be serialized");
          j = {{"kind", "threshold"}, {"alpha", f.alpha}};
        }
      },
      m.family());
}

inline void from_json(const nlohmann::json& j, LossModel& m) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "linear") m = LossModel::linear();
  else if (kind == "monomial") m = LossModel::monomial(j.value("k", 1.0), j.value("q", 1.0));
  else if (kind == "exponential") m = LossModel::exponential(j.at("kappa").get<double>());
  else if (kind == "piecewise_quadratic")
    m = LossModel::piecewise_quadratic(j.at("tau").get<double>(), j.value("paper_literal", false));
  else if (kind == "threshold") {
    const auto& a = j.at("alpha");
    m = LossModel::threshold(a.is_array() ? a.get<std::vector<double>>()
                                          : std::vector<double>{a.get<double>()});
  } else
    throw ConfigError("loss_models.kind", "unknown loss model '" + kind + "'");
}

inline void to_json(nlohmann::json& j, const DemandSpec& d) {
  j = nlohmann::json{{"kind", demand_kind_name(d)}};
  std::visit(
      [&j](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, BinomialMinislot>) {
          j["p0"] = s.p0;
        } else if constexpr (std::is_same_v<T, UniformMinislot>) {
          j["lo"] = s.lo;
          j["hi"] = s.hi;
        } else if constexpr (std::is_same_v<T, TruncatedParetoAggregate>) {
          j["eta"] = s.eta;
          j["x_min"] = s.x_min;
        } else {
          j["values"] = s.values;
          j["probs"] = s.probs;
        }
      },
      d);
}

inline void from_json(const nlohmann::json& j, DemandSpec& d) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "binomial_minislot") d = BinomialMinislot{j.at("p0").get<double>()};
  else if (kind == "uniform_minislot")
    d = UniformMinislot{j.at("lo").get<double>(), j.at("hi").get<double>()};
  else if (kind == "truncated_pareto")
    d = TruncatedParetoAggregate{j.value("eta", 2.0), j.value("x_min", 0.1)};
  else if (kind == "discrete_minislot")
    d = DiscreteMinislot{j.at("values").get<std::vector<double>>(),
                         j.at("probs").get<std::vector<double>>()};
  else if (kind == "empirical_aggregate")
    d = EmpiricalAggregate{j.at("values").get<std::vector<double>>(),
                           j.at("probs").get<std::vector<double>>()};
  else
    throw ConfigError("demand.kind", "unknown demand kind '" + kind + "'");
}

inline void to_json(nlohmann::json& j, const SystemConfig& c) {
  j = nlohmann::json{{"users", c.num_users},
                     {"states", c.num_states},
                     {"minislots", c.num_minislots},
                     {"delta", c.delta},
                     {"rb_count", c.rb_count},
                     {"state_probs", c.state_probs},
                     {"peak_rates", c.peak_rates},
                     {"utilities", c.utilities},
                     {"loss_models", c.loss_models},
                     {"demand", c.demand}};
}

inline void from_json(const nlohmann::json& j, SystemConfig& c) {
  static const char* kKeys[] = {"users",      "states",     "minislots", "delta",
                                "rb_count",   "state_probs", "peak_rates", "utilities",
                                "loss_models", "demand"};
  for (const auto& [key, _] : j.items()) {
    bool known = false;
    for (const char* k : kKeys) known |= key == k;
    if (!known) throw ConfigError(key, "unknown configuration key");
  }
  auto field = [&j](const char* key) -> const nlohmann::json& {
    if (!j.contains(key)) throw ConfigError(key, "missing required key");
    return j.at(key);
  };
  try {
    c.num_users = field("users").get<std::size_t>();
    c.num_states = field("states").get<std::size_t>();
    c.num_minislots = j.value("minislots", std::size_t{8});
    c.delta = field("delta").get<double>();
    c.rb_count = j.value("rb_count", std::size_t{100});
    c.state_probs = field("state_probs").get<std::vector<double>>();
    c.peak_rates = field("peak_rates").get<std::vector<std::vector<double>>>();
    c.utilities = field("utilities").get<std::vector<Utility>>();
    c.loss_models = field("loss_models").get<std::vector<LossModel>>();
    c.demand = field("demand").get<DemandSpec>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config", std::string("malformed value: ") + e.what());
  }
}

inline SystemConfig parse_config(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config", std::string("invalid JSON: ") + e.what());
  }
  return j.get<SystemConfig>();
}

inline SystemConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace jointsched
