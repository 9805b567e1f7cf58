#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "jointsched/error.hpp"
#include "jointsched/rng.hpp"

namespace jointsched {

/// Each minislot carries (1 - delta)/M with probability 1 - p0, else nothing.
struct BinomialMinislot {
  double p0 = 0.5;
  friend bool operator==(const BinomialMinislot&, const BinomialMinislot&) = default;
};

/// Each minislot demand is Uniform[lo, hi]. Values above the per-minislot cap
/// are truncated and counted as blocked.
struct UniformMinislot {
  double lo = 0.0;
  double hi = 0.125;
  friend bool operator==(const UniformMinislot&, const UniformMinislot&) = default;
};

/// Aggregate slot demand D with F(x) = (1 - (x_min/x)^eta) / (1 - x_min^eta)
/// on [x_min, 1], split evenly over the minislots.
struct TruncatedParetoAggregate {
  double eta = 2.0;
  double x_min = 0.1;
  friend bool operator==(const TruncatedParetoAggregate&, const TruncatedParetoAggregate&) = default;
};

/// i.i.d. minislot demands with a finite law.
struct DiscreteMinislot {
  std::vector<double> values;
  std::vector<double> probs;
  friend bool operator==(const DiscreteMinislot&, const DiscreteMinislot&) = default;
};

/// Finite law of the aggregate slot demand, split evenly over minislots. Used
/// for measured (e.g. queue-served) demand.
struct EmpiricalAggregate {
  std::vector<double> values;
  std::vector<double> probs;
  friend bool operator==(const EmpiricalAggregate&, const EmpiricalAggregate&) = default;
};

using DemandSpec = std::variant<BinomialMinislot, UniformMinislot,
                                TruncatedParetoAggregate, DiscreteMinislot,
                                EmpiricalAggregate>;

inline std::string demand_kind_name(const DemandSpec& spec) {
  static constexpr const char* kNames[] = {"binomial_minislot", "uniform_minislot",
                                           "truncated_pareto", "discrete_minislot",
                                           "empirical_aggregate"};
  return kNames[spec.index()];
}

/// A point of a finite (or discretized) law.
struct Atom {
  double value = 0.0;
  double prob = 0.0;
};

inline double truncated_pareto_cdf(double x, double x_min, double eta) {
  if (!(x_min > 0.0 && x_min < 1.0)) throw ConfigError("x_min", "must lie in (0,1)");
  if (!(eta > 0.0)) throw ConfigError("eta", "must be positive");
  if (x <= x_min) return 0.0;
  if (x >= 1.0) return 1.0;
  return (1.0 - std::pow(x_min / x, eta)) / (1.0 - std::pow(x_min, eta));
}

/// Inverse of truncated_pareto_cdf for u in [0, 1).
inline double truncated_pareto_quantile(double u, double x_min, double eta) {
  return x_min * std::pow(1.0 - u * (1.0 - std::pow(x_min, eta)), -1.0 / eta);
}

inline std::size_t sample_channel_state(std::span<const double> state_probs, Rng& rng) {
  return rng.categorical(state_probs);
}

/// Outcome of one slot of minislot demand sampling.
struct MinislotDraw {
  std::vector<double> demand;  // per minislot, each <= (1 - delta)/M
  double blocked = 0.0;        // demand above the per-minislot cap
  double total() const { return std::accumulate(demand.begin(), demand.end(), 0.0); }
};

/// A demand specification bound to a minislot count and sharing factor. Holds
/// the law of the served aggregate demand D = sum_m D(m) that eMBB users see.
class DemandLaw {
 public:
  /// Per-minislot grid used to discretize continuous minislot laws.
  static constexpr std::size_t kMinislotLatticeBins = 250;
  /// Bins used to discretize continuous aggregate laws.
  static constexpr std::size_t kAggregateBins = 2000;

  DemandLaw(DemandSpec spec, std::size_t minislots, double delta)
      : spec_(std::move(spec)), minislots_(minislots), delta_(delta) {
    if (minislots_ == 0) throw ConfigError("minislots", "must be positive");
    if (!(delta_ > 0.0 && delta_ < 1.0)) throw ConfigError("delta", "delta outside (0,1)");
    cap_ = (1.0 - delta_) / static_cast<double>(minislots_);
    std::visit([this](const auto& s) { build(s); }, spec_);
    prefix_.resize(atoms_.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < atoms_.size(); ++i) {
      acc += atoms_[i].prob;
      prefix_[i] = acc;
    }
  }

  const DemandSpec& spec() const noexcept { return spec_; }
  std::size_t minislots() const noexcept { return minislots_; }
  double delta() const noexcept { return delta_; }
  /// f (1 - delta): the largest demand a minislot may carry.
  double minislot_cap() const noexcept { return cap_; }
  /// E[D] of the served aggregate demand.
  double rho() const noexcept { return rho_; }
  /// True when atoms() is a discretization rather than the exact law.
  bool is_continuous() const noexcept { return mode_ != Mode::kDiscrete; }
  std::span<const Atom> atoms() const noexcept { return atoms_; }

  /// E[fn(D)] over atoms().
  template <typename Fn>
  double expect(Fn&& fn) const {
    double acc = 0.0;
    for (const Atom& a : atoms_) acc += a.prob * fn(a.value);
    return acc;
  }

  double moment(double q) const {
    return expect([q](double d) { return d == 0.0 ? (q == 0.0 ? 1.0 : 0.0) : std::pow(d, q); });
  }

  /// P(D <= x). Exact for discrete and truncated-Pareto laws; accurate to
  /// about 1e-4 for continuous minislot laws.
  double cdf(double x) const {
    if (atoms_.empty()) return 1.0;
    if (mode_ == Mode::kPareto) {
      if (x >= top_) return 1.0;
    } else if (x >= atoms_.back().value) {
      return 1.0;
    }
    switch (mode_) {
      case Mode::kDiscrete: {
        const double key = x + 1e-12 * std::max(1.0, std::abs(x));
        auto it = std::upper_bound(atoms_.begin(), atoms_.end(), key,
                                   [](double v, const Atom& a) { return v < a.value; });
        if (it == atoms_.begin()) return 0.0;
        return std::min(1.0, prefix_[static_cast<std::size_t>(it - atoms_.begin()) - 1]);
      }
      case Mode::kPareto: {
        const auto& p = std::get<TruncatedParetoAggregate>(spec_);
        return truncated_pareto_cdf(x, p.x_min, p.eta);
      }
      case Mode::kLattice:
        return lattice_cdf(x);
    }
    return 1.0;
  }

  /// P(D < x); differs from cdf() only at atoms.
  double cdf_left(double x) const {
    if (mode_ != Mode::kDiscrete) return cdf(x);
    const double key = x - 1e-12 * std::max(1.0, std::abs(x));
    auto it = std::upper_bound(atoms_.begin(), atoms_.end(), key,
                               [](double v, const Atom& a) { return v < a.value; });
    if (it == atoms_.begin()) return 0.0;
    return std::min(1.0, prefix_[static_cast<std::size_t>(it - atoms_.begin()) - 1]);
  }

  /// Draw one slot of per-minislot demands.
  MinislotDraw sample(Rng& rng) const {
    MinislotDraw draw;
    draw.demand.assign(minislots_, 0.0);
    sample_into(rng, draw.demand, draw.blocked);
    return draw;
  }

  void sample_into(Rng& rng, std::span<double> out, double& blocked) const {
    blocked = 0.0;
    std::visit(
        [&](const auto& s) {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, BinomialMinislot>) {
            for (double& d : out) d = rng.uniform() < s.p0 ? 0.0 : cap_;
          } else if constexpr (std::is_same_v<T, UniformMinislot>) {
            for (double& d : out) d = clip(rng.uniform(s.lo, s.hi), blocked);
          } else if constexpr (std::is_same_v<T, DiscreteMinislot>) {
            for (double& d : out) d = clip(s.values[rng.categorical(s.probs)], blocked);
          } else if constexpr (std::is_same_v<T, TruncatedParetoAggregate>) {
            split(truncated_pareto_quantile(rng.uniform(), s.x_min, s.eta), out, blocked);
          } else {
            split(s.values[rng.categorical(s.probs)], out, blocked);
          }
        },
        spec_);
  }

 private:
  enum class Mode { kDiscrete, kPareto, kLattice };

  double clip(double d, double& blocked) const {
    if (d > cap_) {
      blocked += d - cap_;
      return cap_;
    }
    return d;
  }

  void split(double total, std::span<double> out, double& blocked) const {
    const double each = total / static_cast<double>(out.size());
    for (double& d : out) d = clip(each, blocked);
  }

  static void check_probs(const std::vector<double>& values, const std::vector<double>& probs,
                          const std::string& field) {
    if (values.empty() || values.size() != probs.size())
      throw ConfigError(field, "values and probs must be non-empty and of equal length");
    double sum = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      if (!(probs[i] >= 0.0)) throw ConfigError(field + ".probs", "must be non-negative");
      if (!(values[i] >= 0.0)) throw ConfigError(field + ".values", "must be non-negative");
      sum += probs[i];
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ConfigError(field + ".probs", "must sum to 1");
  }

  /// Aggregate of M i.i.d. copies of a finite minislot law, atoms merged.
  void convolve_discrete(std::vector<Atom> minislot) {
    for (Atom& a : minislot) a.value = std::min(a.value, cap_);
    std::vector<Atom> agg{{0.0, 1.0}};
    for (std::size_t m = 0; m < minislots_; ++m) {
      std::vector<Atom> next;
      next.reserve(agg.size() * minislot.size());
      for (const Atom& a : agg)
        for (const Atom& b : minislot)
          if (b.prob > 0.0) next.push_back({a.value + b.value, a.prob * b.prob});
      agg = merge_atoms(std::move(next));
    }
    atoms_ = std::move(agg);
    mode_ = Mode::kDiscrete;
  }

  static std::vector<Atom> merge_atoms(std::vector<Atom> atoms) {
    std::sort(atoms.begin(), atoms.end(),
              [](const Atom& a, const Atom& b) { return a.value < b.value; });
    std::vector<Atom> out;
    for (const Atom& a : atoms) {
      if (!out.empty() && std::abs(a.value - out.back().value) <= 1e-12)
        out.back().prob += a.prob;
      else
        out.push_back(a);
    }
    return out;
  }

  void build(const BinomialMinislot& s) {
    if (!(s.p0 >= 0.0 && s.p0 <= 1.0)) throw ConfigError("demand.p0", "must lie in [0,1]");
    convolve_discrete({{0.0, s.p0}, {cap_, 1.0 - s.p0}});
    rho_ = (1.0 - s.p0) * (1.0 - delta_);
  }

  void build(const DiscreteMinislot& s) {
    check_probs(s.values, s.probs, "demand");
    std::vector<Atom> law;
    double mean = 0.0;
    for (std::size_t i = 0; i < s.values.size(); ++i) {
      law.push_back({s.values[i], s.probs[i]});
      mean += s.probs[i] * std::min(s.values[i], cap_);
    }
    convolve_discrete(std::move(law));
    rho_ = mean * static_cast<double>(minislots_);
  }

  void build(const EmpiricalAggregate& s) {
    check_probs(s.values, s.probs, "demand");
    std::vector<Atom> law;
    double mean = 0.0;
    const double top = 1.0 - delta_;
    for (std::size_t i = 0; i < s.values.size(); ++i) {
      const double v = std::min(s.values[i], top);
      law.push_back({v, s.probs[i]});
      mean += s.probs[i] * v;
    }
    atoms_ = merge_atoms(std::move(law));
    mode_ = Mode::kDiscrete;
    rho_ = mean;
  }

  void build(const TruncatedParetoAggregate& s) {
    if (!(s.x_min > 0.0 && s.x_min < 1.0)) throw ConfigError("demand.x_min", "must lie in (0,1)");
    if (!(s.eta > 0.0)) throw ConfigError("demand.eta", "must be positive");
    mode_ = Mode::kPareto;
    // Served demand is min(D, 1 - delta) because each minislot carries D/M.
    const double top = std::min(1.0, 1.0 - delta_);
    top_ = top;
    if (top <= s.x_min) {
      atoms_ = {{top, 1.0}};
      rho_ = top;
      mode_ = Mode::kDiscrete;
      return;
    }
    const double width = (top - s.x_min) / static_cast<double>(kAggregateBins);
    atoms_.reserve(kAggregateBins + 1);
    double prev = 0.0;
    for (std::size_t i = 0; i < kAggregateBins; ++i) {
      const double b = s.x_min + width * static_cast<double>(i + 1);
      const double fb = truncated_pareto_cdf(b, s.x_min, s.eta);
      atoms_.push_back({s.x_min + width * (static_cast<double>(i) + 0.5), fb - prev});
      prev = fb;
    }
    if (prev < 1.0) atoms_.push_back({top, 1.0 - prev});
    // E[min(D, top)] = x_min + int_{x_min}^{top} (1 - F(x)) dx
    const double z = std::pow(s.x_min, s.eta);
    const double norm = 1.0 - z;
    double integral_tail;  // int (x_min/x)^eta dx over [x_min, top]
    if (std::abs(s.eta - 1.0) < 1e-12)
      integral_tail = s.x_min * std::log(top / s.x_min);
    else
      integral_tail = z * (std::pow(top, 1.0 - s.eta) - std::pow(s.x_min, 1.0 - s.eta)) /
                      (1.0 - s.eta);
    rho_ = s.x_min + (integral_tail - z * (top - s.x_min)) / norm;
  }

  void build(const UniformMinislot& s) {
    if (!(s.lo >= 0.0 && s.hi >= s.lo)) throw ConfigError("demand", "uniform needs 0 <= lo <= hi");
    const double hi_eff = std::min(s.hi, cap_);
    if (s.hi - s.lo < 1e-15 || s.lo >= cap_) {
      convolve_discrete({{std::min(s.lo, cap_), 1.0}});
      rho_ = std::min(s.lo, cap_) * static_cast<double>(minislots_);
      return;
    }
    const double density = 1.0 / (s.hi - s.lo);
    // E[min(U, cap)]
    double mean = (hi_eff * hi_eff - s.lo * s.lo) * 0.5 * density;
    const double top_mass = s.hi > cap_ ? (s.hi - cap_) * density : 0.0;
    mean += cap_ * top_mass;
    rho_ = mean * static_cast<double>(minislots_);

    // Linear binning of the minislot law onto the lattice j*w, j = 0..n.
    const std::size_t n = kMinislotLatticeBins;
    lattice_w_ = cap_ / static_cast<double>(n);
    std::vector<double> pmf(n + 1, 0.0);
    for (std::size_t j = 0; j <= n; ++j) {
      const double jd = static_cast<double>(j);
      pmf[j] = density * lattice_w_ *
               (hat_cdf(hi_eff / lattice_w_ - jd) - hat_cdf(s.lo / lattice_w_ - jd));
    }
    pmf[n] += top_mass;
    std::vector<double> agg{1.0};
    for (std::size_t m = 0; m < minislots_; ++m) {
      std::vector<double> next(agg.size() + n, 0.0);
      for (std::size_t i = 0; i < agg.size(); ++i) {
        if (agg[i] == 0.0) continue;
        for (std::size_t j = 0; j <= n; ++j) next[i + j] += agg[i] * pmf[j];
      }
      agg = std::move(next);
    }
    atoms_.resize(agg.size());
    for (std::size_t k = 0; k < agg.size(); ++k)
      atoms_[k] = {lattice_w_ * static_cast<double>(k), agg[k]};
    mode_ = Mode::kLattice;
  }

  /// Integral of the unit hat centred at 0 from -inf to t.
  static double hat_cdf(double t) {
    if (t <= -1.0) return 0.0;
    if (t <= 0.0) return 0.5 * (t + 1.0) * (t + 1.0);
    if (t <= 1.0) return 1.0 - 0.5 * (1.0 - t) * (1.0 - t);
    return 1.0;
  }

  double lattice_cdf(double x) const {
    if (x < 0.0) return 0.0;
    const double t = x / lattice_w_;
    const auto k0 = static_cast<std::size_t>(std::floor(t));
    double f = k0 >= 1 ? prefix_[std::min(k0 - 1, prefix_.size() - 1)] : 0.0;
    for (std::size_t k = k0; k <= k0 + 1 && k < atoms_.size(); ++k)
      f += atoms_[k].prob * hat_cdf(t - static_cast<double>(k));
    return std::clamp(f, 0.0, 1.0);
  }

  DemandSpec spec_;
  std::size_t minislots_;
  double delta_;
  double cap_ = 0.0;
  double rho_ = 0.0;
  double lattice_w_ = 0.0;
  double top_ = 1.0;
  Mode mode_ = Mode::kDiscrete;
  std::vector<Atom> atoms_;
  std::vector<double> prefix_;
};

inline double aggregate_cdf(const DemandLaw& law, double x) { return law.cdf(x); }

inline MinislotDraw sample_minislot_demands(const DemandLaw& law, Rng& rng) {
  return law.sample(rng);
}

}  // namespace jointsched
