#include "interarec/choice.hpp"

#include <random>

#include "test_util.hpp"

using namespace interarec;

namespace {

Item priced(std::string id, double price, std::optional<std::string> color = std::nullopt) {
  return {std::move(id), "", std::nullopt, std::move(color), Money::from_double(price), {}};
}

struct Instance {
  CatalogSnapshot catalog;
  MnlParameters params;
};

Instance random_instance(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> price(1.0, 100.0);
  std::uniform_real_distribution<double> weight(0.0, 1.0);
  std::vector<Item> items;
  MnlParameters params;
  for (std::size_t i = 0; i < n; ++i) {
    const auto id = "i" + std::to_string(i);
    items.push_back(priced(id, price(rng)));
    params.v[id] = weight(rng);
  }
  return {CatalogSnapshot(items, 1), params};
}

std::vector<Transaction> repeat(std::vector<std::string> offered, std::optional<std::string> chosen, int times) {
  return std::vector<Transaction>(static_cast<std::size_t>(times), Transaction{std::move(offered), std::move(chosen)});
}

std::vector<Transaction> counts(int a, int b, int none) {
  auto t = repeat({"a", "b"}, "a", a);
  auto tb = repeat({"a", "b"}, "b", b);
  auto tn = repeat({"a", "b"}, std::nullopt, none);
  t.insert(t.end(), tb.begin(), tb.end());
  t.insert(t.end(), tn.begin(), tn.end());
  return t;
}

const CatalogSnapshot& abc_catalog() {
  static const CatalogSnapshot c({priced("a", 10), priced("b", 8), priced("c", 6)}, 1);
  return c;
}

MnlParameters abc_params() { return {1.0, {{"a", 0.2}, {"b", 0.5}, {"c", 0.9}}}; }

}  // namespace

TEST(MnlProbability, Examples) {
  MnlParameters p{1.0, {{"a", 1.0}, {"b", 2.0}}};
  EXPECT_DOUBLE_EQ(mnl_probability(p, {"a"}, "a"), 0.5);
  EXPECT_DOUBLE_EQ(mnl_probability(p, {"a", "b"}, "b"), 0.5);
  EXPECT_ERRC(mnl_probability(p, {"a"}, "b"), Errc::ItemNotOffered);
  EXPECT_ERRC(mnl_probability(p, {"a", "zz"}, "a"), Errc::UnknownItem);
}

TEST(ExpectedRevenue, Examples) {
  CatalogSnapshot catalog({priced("a", 10), priced("b", 20)}, 1);
  MnlParameters p{1.0, {{"a", 1.0}, {"b", 1.0}}};
  EXPECT_DOUBLE_EQ(expected_revenue(p, catalog, {"a"}), 5.0);
  EXPECT_DOUBLE_EQ(expected_revenue(p, catalog, {}), 0.0);
  EXPECT_NEAR(expected_revenue(p, catalog, {"a", "b"}), 10.0, 1e-12);
  EXPECT_ERRC(expected_revenue(p, catalog, {"zz"}), Errc::UnknownItem);
}

// Oracle values enumerated offline for prices (10, 8, 6), v = (0.2, 0.5, 0.9).
TEST(BruteForce, ThreeItemEnumeration) {
  const auto& c = abc_catalog();
  const auto p = abc_params();
  EXPECT_NEAR(expected_revenue(p, c, {"a"}), 1.6666666666666667, 1e-12);
  EXPECT_NEAR(expected_revenue(p, c, {"b"}), 2.6666666666666665, 1e-12);
  EXPECT_NEAR(expected_revenue(p, c, {"c"}), 2.842105263157895, 1e-12);
  EXPECT_NEAR(expected_revenue(p, c, {"a", "b"}), 3.5294117647058822, 1e-12);
  EXPECT_NEAR(expected_revenue(p, c, {"a", "c"}), 3.5238095238095237, 1e-12);
  EXPECT_NEAR(expected_revenue(p, c, {"b", "c"}), 3.916666666666667, 1e-12);
  EXPECT_NEAR(expected_revenue(p, c, {"a", "b", "c"}), 4.384615384615385, 1e-12);

  auto best = brute_force_optimal(p, c, {});
  EXPECT_EQ(best.items, (std::vector<std::string>{"a", "b", "c"}));
  EXPECT_NEAR(best.revenue, 57.0 / 13.0, 1e-12);

  auto single = brute_force_optimal(p, c, {{}, 1});
  EXPECT_EQ(single.items, (std::vector<std::string>{"c"}));
  EXPECT_NEAR(single.revenue, 54.0 / 19.0, 1e-12);
}

TEST(BruteForce, EmptyAndTooLarge) {
  auto none = brute_force_optimal(abc_params(), abc_catalog(), {{Money::from_cents(100000), std::nullopt, std::nullopt}, {}});
  EXPECT_TRUE(none.items.empty());
  EXPECT_EQ(none.revenue, 0.0);

  std::mt19937_64 rng(1);
  auto big = random_instance(rng, 21);
  EXPECT_ERRC(brute_force_optimal(big.params, big.catalog, {}), Errc::TooLarge);
  EXPECT_ERRC(optimize_assortment(big.params, big.catalog, {{}, 3}), Errc::TooLarge);
  EXPECT_NO_THROW(optimize_assortment(big.params, big.catalog, {}));
  EXPECT_ERRC(optimize_assortment(big.params, big.catalog, {{}, 0}), Errc::InvalidConfig);
}

TEST(BruteForce, TiesPreferSmallerThenLexicographic) {
  // b and c are identical; a zero-weight item never adds revenue.
  CatalogSnapshot c({priced("a", 50), priced("b", 10), priced("c", 10)}, 1);
  MnlParameters p{1.0, {{"a", 0.0}, {"b", 0.5}, {"c", 0.5}}};
  auto best = brute_force_optimal(p, c, {{}, 1});
  EXPECT_EQ(best.items, (std::vector<std::string>{"b"}));
}

TEST(OptimizeAssortment, AsosConstraintsRespected) {
  CatalogSnapshot c({priced("g1", 18, "bright green"), priced("g2", 144, "Deep Teal Green"), priced("g3", 90, "green"),
                     priced("r1", 50, "red"), priced("g4", 150, "green"), priced("g5", 17.99, "green"),
                     priced("x", 60, "greenish")},
                    1);
  MnlParameters p;
  for (const auto& item : c.items()) p.v[item.item_id] = 0.5;
  FeasibleSpec spec{{Money::from_cents(1800), Money::from_cents(14400), std::string("green")}, {}};
  for (auto a : {optimize_assortment(p, c, spec), brute_force_optimal(p, c, spec)}) {
    EXPECT_FALSE(a.items.empty());
    for (const auto& id : a.items) {
      const auto& item = c.at(id);
      EXPECT_GE(item.price, Money::from_cents(1800));
      EXPECT_LE(item.price, Money::from_cents(14400));
      EXPECT_TRUE(color_matches(item, "green"));
    }
  }
}

TEST(OptimizeAssortment, VacuousFilter) {
  auto a = optimize_assortment(abc_params(), abc_catalog(), {{std::nullopt, std::nullopt, std::string("pink")}, {}});
  EXPECT_TRUE(a.items.empty());
  EXPECT_EQ(a.revenue, 0.0);
}

// Property: revenue-ordered equals exhaustive search on unconstrained MNL.
TEST(OptimizeAssortment, RevenueOrderedMatchesOracle) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    auto inst = random_instance(rng, 1 + static_cast<std::size_t>(trial % 12));
    const auto fast = optimize_assortment(inst.params, inst.catalog, {});
    const auto oracle = brute_force_optimal(inst.params, inst.catalog, {});
    ASSERT_EQ(fast.revenue, oracle.revenue) << "trial " << trial;
    EXPECT_NEAR(expected_revenue(inst.params, inst.catalog, fast.items), fast.revenue, 1e-9);
    EXPECT_NEAR(expected_revenue(inst.params, inst.catalog, oracle.items), oracle.revenue, 1e-9);
  }
}

TEST(MnlProperty, NormalizationAndMonotoneDenominators) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    auto inst = random_instance(rng, 8);
    std::vector<std::string> s;
    for (const auto& [id, w] : inst.params.v) {
      if (rng() % 2) s.push_back(id);
    }
    double total = 0.0, sum_v = 0.0;
    for (const auto& k : s) {
      total += mnl_probability(inst.params, s, k);
      sum_v += inst.params.v[k];
    }
    total += inst.params.v0 / (inst.params.v0 + sum_v);
    EXPECT_NEAR(total, 1.0, 1e-12);

    for (const auto& [id, w] : inst.params.v) {
      if (std::find(s.begin(), s.end(), id) != s.end()) continue;
      auto bigger = s;
      bigger.push_back(id);
      for (const auto& k : s) EXPECT_LE(mnl_probability(inst.params, bigger, k), mnl_probability(inst.params, s, k));
    }
  }
}

TEST(MnlJson, RoundTripAndValidation) {
  auto p = abc_params();
  auto back = mnl_from_json(to_json(p));
  EXPECT_EQ(back.v, p.v);
  EXPECT_EQ(back.v0, 1.0);
  EXPECT_ERRC(mnl_from_json(nlohmann::json::parse(R"({"v0":1,"v":{"a":1.5}})")), Errc::InvalidConfig);
  EXPECT_ERRC(mnl_from_json(nlohmann::json::parse(R"({"v0":0,"v":{}})")), Errc::InvalidConfig);
  auto t = transaction_from_json(nlohmann::json::parse(R"({"offered":["a","b"],"chosen":null})"));
  EXPECT_FALSE(t.chosen);
  EXPECT_EQ(t.offered.size(), 2u);
}

TEST(EstimateMnl, SymmetricCounts) {
  auto est = estimate_mnl(counts(100, 100, 100));
  EXPECT_NEAR(est.params.v.at("a"), 1.0, 1e-6);
  EXPECT_NEAR(est.params.v.at("b"), 1.0, 1e-6);
  EXPECT_LE(est.gradient_norm, 1e-8);
}

// Closed-form MLE for one offer set: v_k = n_k / n_0, cross-checked by direct
// likelihood maximization.
TEST(EstimateMnl, ClampsAboveOne) {
  auto est = estimate_mnl(counts(100, 200, 100));
  EXPECT_NEAR(est.unclamped.at("a"), 1.0, 1e-6);
  EXPECT_NEAR(est.unclamped.at("b"), 2.0, 1e-6);
  EXPECT_NEAR(est.params.v.at("b"), 1.0, 1e-12);
  EXPECT_TRUE(est.has("b", EstimationIssueCode::ClampedHigh));
  EXPECT_FALSE(est.has("a", EstimationIssueCode::ClampedHigh));
}

TEST(EstimateMnl, Errors) {
  EXPECT_ERRC(estimate_mnl(counts(1, 1, 1), {"c"}), Errc::NeverOffered);
  EXPECT_ERRC(estimate_mnl({{{"a"}, std::string("b")}}), Errc::ItemNotOffered);
}

TEST(EstimateMnl, DegenerateAndNeverChosen) {
  // a is chosen every time it is offered; c is never chosen.
  auto t = repeat({"a"}, "a", 10);
  auto u = repeat({"b", "c"}, "b", 5);
  auto w = repeat({"b", "c"}, std::nullopt, 5);
  t.insert(t.end(), u.begin(), u.end());
  t.insert(t.end(), w.begin(), w.end());
  auto est = estimate_mnl(t);
  EXPECT_TRUE(est.has("a", EstimationIssueCode::DegenerateData));
  EXPECT_EQ(est.params.v.at("a"), 1.0);
  EXPECT_TRUE(est.has("c", EstimationIssueCode::ClampedLow));
  EXPECT_EQ(est.params.v.at("c"), 1e-9);
  EXPECT_NEAR(est.params.v.at("b"), 1.0, 1e-6);
}

TEST(EstimateMnl, MultipleOfferSetsRecoverTruth) {
  MnlParameters truth{1.0, {{"a", 0.3}, {"b", 0.6}, {"c", 0.9}}};
  std::mt19937_64 rng(99);
  const std::vector<std::vector<std::string>> offers = {{"a", "b"}, {"b", "c"}, {"a", "c"}, {"a", "b", "c"}};
  std::vector<Transaction> data;
  for (int i = 0; i < 20000; ++i) {
    const auto& s = offers[static_cast<std::size_t>(i) % offers.size()];
    double denom = 1.0;
    for (const auto& id : s) denom += truth.v[id];
    double u = std::uniform_real_distribution<double>(0.0, denom)(rng);
    std::optional<std::string> chosen;
    for (const auto& id : s) {
      if (u < truth.v[id]) {
        chosen = id;
        break;
      }
      u -= truth.v[id];
    }
    data.push_back({s, chosen});
  }
  auto est = estimate_mnl(data);
  for (const auto& [id, w] : truth.v) EXPECT_NEAR(est.params.v.at(id), w, 0.05) << id;
  EXPECT_LE(est.gradient_norm, 1e-8);
}
