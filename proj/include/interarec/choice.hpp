#ifndef INTERAREC_CHOICE_HPP
#define INTERAREC_CHOICE_HPP

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "interarec/catalog.hpp"
#include "interarec/constraints.hpp"
#include "interarec/error.hpp"

namespace interarec {

/// Multinomial-logit weights. v0 is the no-purchase weight.
struct MnlParameters {
  double v0 = 1.0;
  std::map<std::string, double> v;

  double weight(std::string_view item_id) const {
    auto it = v.find(std::string(item_id));
    if (it == v.end()) throw Error(Errc::UnknownItem, "no MNL weight for '" + std::string(item_id) + "'");
    return it->second;
  }
};

inline nlohmann::json to_json(const MnlParameters& p) {
  nlohmann::json v = nlohmann::json::object();
  for (const auto& [id, w] : p.v) v[id] = w;
  return {{"v0", p.v0}, {"v", std::move(v)}};
}

inline MnlParameters mnl_from_json(const nlohmann::json& j) {
  MnlParameters p;
  p.v0 = j.value("v0", 1.0);
  if (!(p.v0 > 0.0) || !std::isfinite(p.v0)) throw Error(Errc::InvalidConfig, "v0 must be positive");
  for (const auto& [id, w] : j.at("v").items()) {
    const double weight = w.get<double>();
    if (!(weight >= 0.0 && weight <= 1.0)) {
      throw Error(Errc::InvalidConfig, "weight of '" + id + "' outside [0, 1]");
    }
    p.v[id] = weight;
  }
  return p;
}

/// P(k | S) = v_k / (v0 + sum of v over S).
inline double mnl_probability(const MnlParameters& params, const std::vector<std::string>& assortment,
                              std::string_view k) {
  if (std::find(assortment.begin(), assortment.end(), k) == assortment.end()) {
    throw Error(Errc::ItemNotOffered, "'" + std::string(k) + "' is not in the assortment");
  }
  double denom = params.v0;
  for (const auto& id : assortment) denom += params.weight(id);
  return params.weight(k) / denom;
}

namespace detail {

/// sum_k p_k * v_k / (v0 + sum v), accumulated in the given index order.
inline double revenue_of(const std::vector<std::size_t>& members, const std::vector<double>& prices,
                         const std::vector<double>& weights, double v0) {
  double denom = v0;
  for (auto i : members) denom += weights[i];
  double revenue = 0.0;
  for (auto i : members) revenue += prices[i] * weights[i] / denom;
  return revenue;
}

}  // namespace detail

/// R(S) = sum_{k in S} p_k * P(k | S). Summation runs in item_id order so the
/// value depends only on the set.
inline double expected_revenue(const MnlParameters& params, const CatalogSnapshot& catalog,
                               std::vector<std::string> assortment) {
  std::sort(assortment.begin(), assortment.end());
  std::vector<double> prices;
  std::vector<double> weights;
  std::vector<std::size_t> members;
  for (const auto& id : assortment) {
    prices.push_back(catalog.at(id).price.value());
    weights.push_back(params.weight(id));
    members.push_back(members.size());
  }
  return detail::revenue_of(members, prices, weights, params.v0);
}

struct FeasibleSpec {
  ConstraintSet constraints;
  std::optional<std::size_t> max_cardinality;  // nullopt = unbounded
};

struct Assortment {
  std::vector<std::string> items;  // sorted by item_id
  double revenue = 0.0;
};

inline nlohmann::json to_json(const Assortment& a) {
  return {{"items", a.items}, {"revenue", a.revenue}};
}

inline constexpr std::size_t kBruteForceLimit = 20;

namespace detail {

struct Universe {
  std::vector<std::string> ids;  // sorted
  std::vector<double> prices;
  std::vector<double> weights;
};

inline Universe filtered_universe(const MnlParameters& params, const CatalogSnapshot& catalog,
                                  const FeasibleSpec& spec, const ColorVocabulary* vocab) {
  if (spec.max_cardinality && *spec.max_cardinality == 0) {
    throw Error(Errc::InvalidConfig, "max_cardinality must be >= 1");
  }
  std::vector<const Item*> kept;
  for (const auto& item : catalog.items()) {
    if (satisfies(item, spec.constraints, vocab)) kept.push_back(&item);
  }
  std::sort(kept.begin(), kept.end(), [](const Item* a, const Item* b) { return a->item_id < b->item_id; });
  Universe u;
  for (const auto* item : kept) {
    u.ids.push_back(item->item_id);
    u.prices.push_back(item->price.value());
    u.weights.push_back(params.weight(item->item_id));
  }
  return u;
}

inline Assortment to_assortment(const Universe& u, const std::vector<std::size_t>& members, double revenue) {
  Assortment a;
  for (auto i : members) a.items.push_back(u.ids[i]);
  a.revenue = revenue;
  return a;
}

inline Assortment brute_force(const Universe& u, std::optional<std::size_t> max_cardinality, double v0) {
  const auto n = u.ids.size();
  if (n > kBruteForceLimit) {
    throw Error(Errc::TooLarge, std::to_string(n) + " items pass the filter; exhaustive search allows " +
                                    std::to_string(kBruteForceLimit));
  }
  const auto cap = max_cardinality.value_or(n);
  std::vector<std::size_t> best;
  double best_revenue = 0.0;
  std::vector<std::size_t> members;
  members.reserve(n);
  for (std::uint32_t mask = 1; mask < (std::uint32_t{1} << n); ++mask) {
    const auto size = static_cast<std::size_t>(std::popcount(mask));
    if (size > cap) continue;
    members.clear();
    for (std::size_t i = 0; i < n; ++i) {
      if (mask & (std::uint32_t{1} << i)) members.push_back(i);
    }
    const double revenue = revenue_of(members, u.prices, u.weights, v0);
    bool better = revenue > best_revenue;
    if (!better && revenue == best_revenue) {
      // Smaller sets first, then lexicographic order of the sorted ids.
      better = members.size() < best.size() ||
               (members.size() == best.size() && std::lexicographical_compare(
                                                     members.begin(), members.end(), best.begin(), best.end()));
    }
    if (better) {
      best = members;
      best_revenue = revenue;
    }
  }
  return to_assortment(u, best, best_revenue);
}

}  // namespace detail

/// Exhaustive search over the filtered universe (at most 20 items).
inline Assortment brute_force_optimal(const MnlParameters& params, const CatalogSnapshot& catalog,
                                      const FeasibleSpec& spec, const ColorVocabulary* vocab = nullptr) {
  const auto u = detail::filtered_universe(params, catalog, spec, vocab);
  return detail::brute_force(u, spec.max_cardinality, params.v0);
}

/// Filters by the constraint set, then solves exactly: nested price-ordered
/// sets when unbounded, exhaustive search when a cardinality cap is present.
inline Assortment optimize_assortment(const MnlParameters& params, const CatalogSnapshot& catalog,
                                      const FeasibleSpec& spec, const ColorVocabulary* vocab = nullptr) {
  const auto u = detail::filtered_universe(params, catalog, spec, vocab);
  if (spec.max_cardinality) return detail::brute_force(u, spec.max_cardinality, params.v0);

  std::vector<std::size_t> by_price(u.ids.size());
  std::iota(by_price.begin(), by_price.end(), std::size_t{0});
  std::stable_sort(by_price.begin(), by_price.end(),
                   [&u](std::size_t a, std::size_t b) { return u.prices[a] > u.prices[b]; });
  std::vector<std::size_t> best;
  double best_revenue = 0.0;
  std::vector<std::size_t> prefix;
  for (auto idx : by_price) {
    prefix.insert(std::upper_bound(prefix.begin(), prefix.end(), idx), idx);
    const double revenue = detail::revenue_of(prefix, u.prices, u.weights, params.v0);
    if (revenue > best_revenue) {
      best = prefix;
      best_revenue = revenue;
    }
  }
  return detail::to_assortment(u, best, best_revenue);
}

// ---------------------------------------------------------------------------
// Estimation

struct Transaction {
  std::vector<std::string> offered;
  std::optional<std::string> chosen;  // nullopt = no purchase
};

inline Transaction transaction_from_json(const nlohmann::json& j) {
  Transaction t;
  t.offered = j.at("offered").get<std::vector<std::string>>();
  if (auto it = j.find("chosen"); it != j.end() && !it->is_null()) t.chosen = it->get<std::string>();
  return t;
}

enum class EstimationIssueCode { ClampedHigh, ClampedLow, DegenerateData, NotConverged };

inline std::string_view to_string(EstimationIssueCode c) {
  switch (c) {
    case EstimationIssueCode::ClampedHigh: return "ClampedHigh";
    case EstimationIssueCode::ClampedLow: return "ClampedLow";
    case EstimationIssueCode::DegenerateData: return "DegenerateData";
    case EstimationIssueCode::NotConverged: return "NotConverged";
  }
  return "Unknown";
}

struct EstimationIssue {
  std::string item_id;
  EstimationIssueCode code;
  double unclamped = 0.0;  // +inf for degenerate items
};

struct MnlEstimate {
  MnlParameters params;
  std::map<std::string, double> unclamped;  // maximum-likelihood weights before clamping
  std::vector<EstimationIssue> issues;
  double log_likelihood = 0.0;
  double gradient_norm = 0.0;
  int iterations = 0;

  bool has(std::string_view item, EstimationIssueCode code) const {
    return std::any_of(issues.begin(), issues.end(),
                       [&](const auto& i) { return i.item_id == item && i.code == code; });
  }
};

struct EstimateOptions {
  double lower = 1e-9;
  double upper = 1.0;
  double gradient_tolerance = 1e-8;
  int max_iterations = 200;
};

/// Maximum-likelihood MNL weights with v0 fixed at 1. Newton ascent on the
/// log-weights (the log-likelihood is concave there). Items never chosen sit
/// at the lower clamp; items chosen on every offer have no finite optimum and
/// are reported as DegenerateData at the upper clamp.
inline MnlEstimate estimate_mnl(const std::vector<Transaction>& transactions,
                                const std::vector<std::string>& items_to_estimate = {},
                                const EstimateOptions& options = {}) {
  std::map<std::string, std::size_t> index;
  for (const auto& t : transactions) {
    for (const auto& id : t.offered) index.try_emplace(id, 0);
    if (t.chosen && std::find(t.offered.begin(), t.offered.end(), *t.chosen) == t.offered.end()) {
      throw Error(Errc::ItemNotOffered, "chosen item '" + *t.chosen + "' was not offered");
    }
  }
  for (const auto& id : items_to_estimate) {
    if (!index.count(id)) throw Error(Errc::NeverOffered, "item '" + id + "' never appears in an offer set");
  }
  std::vector<std::string> ids;
  for (auto& [id, i] : index) {
    i = ids.size();
    ids.push_back(id);
  }
  const auto n = ids.size();

  // Aggregate identical offer sets.
  struct OfferGroup {
    std::vector<std::size_t> members;
    std::vector<double> chosen;  // aligned with members
    double total = 0.0;
  };
  std::map<std::vector<std::size_t>, OfferGroup> groups;
  std::vector<double> chosen_count(n, 0.0);
  std::vector<double> offered_count(n, 0.0);
  for (const auto& t : transactions) {
    std::vector<std::size_t> members;
    for (const auto& id : t.offered) members.push_back(index.at(id));
    std::sort(members.begin(), members.end());
    members.erase(std::unique(members.begin(), members.end()), members.end());
    auto& g = groups[members];
    if (g.members.empty()) {
      g.members = members;
      g.chosen.assign(members.size(), 0.0);
    }
    g.total += 1.0;
    for (auto m : members) offered_count[m] += 1.0;
    if (t.chosen) {
      const auto c = index.at(*t.chosen);
      chosen_count[c] += 1.0;
      g.chosen[static_cast<std::size_t>(std::find(members.begin(), members.end(), c) - members.begin())] += 1.0;
    }
  }

  MnlEstimate result;
  std::vector<double> weight(n, 1.0);
  std::vector<std::ptrdiff_t> free_pos(n, -1);
  std::vector<std::size_t> free_items;
  for (std::size_t i = 0; i < n; ++i) {
    if (chosen_count[i] == 0.0) {
      weight[i] = options.lower;
      result.unclamped[ids[i]] = 0.0;
      result.issues.push_back({ids[i], EstimationIssueCode::ClampedLow, 0.0});
    } else if (chosen_count[i] == offered_count[i]) {
      weight[i] = options.upper;
      result.unclamped[ids[i]] = std::numeric_limits<double>::infinity();
      result.issues.push_back({ids[i], EstimationIssueCode::DegenerateData, std::numeric_limits<double>::infinity()});
    } else {
      free_pos[i] = static_cast<std::ptrdiff_t>(free_items.size());
      free_items.push_back(i);
    }
  }

  const auto m = static_cast<Eigen::Index>(free_items.size());
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(m);
  auto apply = [&](const Eigen::VectorXd& th) {
    for (Eigen::Index j = 0; j < m; ++j) weight[free_items[static_cast<std::size_t>(j)]] = std::exp(th[j]);
  };
  auto log_likelihood = [&]() {
    double ll = 0.0;
    for (const auto& [key, g] : groups) {
      double denom = 1.0;
      for (auto i : g.members) denom += weight[i];
      for (std::size_t a = 0; a < g.members.size(); ++a) {
        if (g.chosen[a] > 0.0) ll += g.chosen[a] * std::log(weight[g.members[a]]);
      }
      ll -= g.total * std::log(denom);
    }
    return ll;
  };

  apply(theta);
  double ll = log_likelihood();
  Eigen::VectorXd grad(m);
  Eigen::MatrixXd hess(m, m);
  bool converged = m == 0;
  int iter = 0;
  for (; iter < options.max_iterations && m > 0; ++iter) {
    grad.setZero();
    hess.setZero();
    for (const auto& [key, g] : groups) {
      double denom = 1.0;
      for (auto i : g.members) denom += weight[i];
      std::vector<std::pair<Eigen::Index, double>> probs;
      for (std::size_t a = 0; a < g.members.size(); ++a) {
        const auto i = g.members[a];
        if (free_pos[i] < 0) continue;
        const auto j = static_cast<Eigen::Index>(free_pos[i]);
        grad[j] += g.chosen[a];
        probs.emplace_back(j, weight[i] / denom);
      }
      for (const auto& [j, pj] : probs) {
        grad[j] -= g.total * pj;
        hess(j, j) -= g.total * pj;
        for (const auto& [k, pk] : probs) hess(j, k) += g.total * pj * pk;
      }
    }
    result.gradient_norm = grad.norm();
    if (result.gradient_norm <= options.gradient_tolerance) {
      converged = true;
      break;
    }
    Eigen::VectorXd step = (-hess).ldlt().solve(grad);
    if (!step.allFinite()) step = grad;
    double scale = 1.0;
    const Eigen::VectorXd start = theta;
    for (int ls = 0; ls < 60; ++ls) {
      theta = start + scale * step;
      apply(theta);
      const double cand = log_likelihood();
      if (cand >= ll - 1e-12 * std::abs(ll)) {
        ll = cand;
        break;
      }
      scale *= 0.5;
    }
  }
  result.iterations = iter;
  result.log_likelihood = ll;
  if (!converged) result.issues.push_back({"", EstimationIssueCode::NotConverged, result.gradient_norm});

  for (auto i : free_items) {
    const double raw = weight[i];
    result.unclamped[ids[i]] = raw;
    if (raw > options.upper) {
      result.issues.push_back({ids[i], EstimationIssueCode::ClampedHigh, raw});
    } else if (raw < options.lower) {
      result.issues.push_back({ids[i], EstimationIssueCode::ClampedLow, raw});
    }
  }
  result.params.v0 = 1.0;
  for (std::size_t i = 0; i < n; ++i) result.params.v[ids[i]] = std::clamp(weight[i], options.lower, options.upper);
  return result;
}

}  // namespace interarec

#endif  // INTERAREC_CHOICE_HPP
