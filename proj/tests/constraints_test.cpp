#include "interarec/constraints.hpp"

#include <random>

#include "test_util.hpp"

using namespace interarec;
using interarec::testing::read_fixture;

namespace {

Item item(std::string id, std::int64_t cents, std::optional<std::string> color = std::nullopt) {
  return {std::move(id), "", std::nullopt, std::move(color), Money::from_cents(cents), {}};
}

// Renders cents as "$1,234,567.89".
std::string render_dollars(std::int64_t cents) {
  auto whole = std::to_string(cents / 100);
  std::string grouped;
  for (std::size_t i = 0; i < whole.size(); ++i) {
    if (i > 0 && (whole.size() - i) % 3 == 0) grouped.push_back(',');
    grouped.push_back(whole[i]);
  }
  const auto frac = cents % 100;
  return "$" + grouped + "." + (frac < 10 ? "0" : "") + std::to_string(frac);
}

}  // namespace

TEST(Money, RenderAndCompare) {
  EXPECT_EQ(Money::from_cents(1800).to_string(), "18.00");
  EXPECT_EQ(Money::from_cents(5).to_string(), "0.05");
  EXPECT_EQ(Money::from_double(63.97).cents(), 6397);
  EXPECT_EQ(Money::from_cents(-150).to_string(), "-1.50");
  EXPECT_LT(Money::from_cents(1), Money::from_cents(2));
  EXPECT_ERRC(Money::from_double(std::nan("")), Errc::InvalidPrice);
}

TEST(ParsePrice, FixtureStrings) {
  EXPECT_EQ(parse_price("$18.00$ for the JDY puff sleeve mini smock dress"), Money::from_cents(1800));
  EXPECT_EQ(parse_price("\\$799,888"), Money::from_cents(79988800));
  EXPECT_EQ(parse_price("$799,888"), Money::from_cents(79988800));
  EXPECT_EQ(parse_price("$63.97, as seen on the Nike Waffle Debut"), Money::from_cents(6397));
  EXPECT_EQ(parse_price("\\$180, as seen on"), Money::from_cents(18000));
  EXPECT_EQ(parse_price("$1,350,000"), Money::from_cents(135000000));
}

TEST(ParsePrice, AbsentCases) {
  EXPECT_FALSE(parse_price("Not Available"));
  EXPECT_FALSE(parse_price("\"not available.\""));
  EXPECT_FALSE(parse_price("N/A"));
  EXPECT_FALSE(parse_price("no digits at all"));
  EXPECT_FALSE(parse_price(""));
}

TEST(ParsePrice, SymbolBeatsBareNumber) {
  EXPECT_EQ(parse_price("size 8 shoes for £45.50"), Money::from_cents(4550));
  EXPECT_EQ(parse_price("3 items from 12.5"), Money::from_cents(300));
  EXPECT_EQ(parse_price("1,5 and 2"), Money::from_cents(100));  // comma not a thousands group
  EXPECT_EQ(parse_price("$9.999"), Money::from_cents(1000));
}

// Property: round trip over the "$" + thousands-separator renderer.
TEST(ParsePrice, RenderedRoundTrip) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::int64_t> dist(0, 100'000'000'000LL);
  for (int i = 0; i < 5000; ++i) {
    const auto cents = i < 300 ? i : dist(rng);
    const auto text = render_dollars(cents);
    ASSERT_EQ(parse_price(text), Money::from_cents(cents)) << text;
  }
}

TEST(Decompose, AsosFixture) {
  auto c = decompose(parse_summary_text(read_fixture("asos_summary.txt")));
  EXPECT_EQ(c.lowest_price, Money::from_cents(1800));
  EXPECT_EQ(c.highest_price, Money::from_cents(14400));
  EXPECT_EQ(c.color, "green");
}

TEST(Decompose, NikeFixture) {
  auto c = decompose(parse_summary_text(read_fixture("nike_summary.txt")));
  EXPECT_EQ(c.lowest_price, Money::from_cents(6397));
  EXPECT_EQ(c.highest_price, Money::from_cents(18000));
  EXPECT_FALSE(c.color);
}

TEST(Decompose, AllAbsentIsEmpty) {
  EXPECT_TRUE(decompose(KeywordSummary{}).empty());
}

TEST(Decompose, PureFunction) {
  const auto s = parse_summary_text(read_fixture("asos_summary.txt"));
  const auto copy = s;
  EXPECT_EQ(decompose(s), decompose(s));
  EXPECT_EQ(s, copy);
}

TEST(ColorVocabulary, WholeWordFirstMatch) {
  ColorVocabulary v;
  EXPECT_EQ(v.first_match("Greenish tones, then red and blue"), "red");
  EXPECT_EQ(v.first_match("Deep TEAL green"), "teal");
  EXPECT_EQ(v.first_match("a grey coat"), "gray");
  EXPECT_FALSE(v.first_match("redwood bluebird"));
  v.add("Sky Blue");
  EXPECT_EQ(v.first_match("loves sky blue shirts"), "sky blue");  // longest at the same position
}

TEST(ColorVocabulary, FromCatalog) {
  CatalogSnapshot catalog({item("a", 100, "Chartreuse"), item("b", 100, "red")}, 1);
  auto v = ColorVocabulary::from_catalog(catalog);
  EXPECT_EQ(v.first_match("bright chartreuse tops"), "chartreuse");
}

TEST(Satisfies, InclusiveBandAndColor) {
  ConstraintSet c{Money::from_cents(1800), Money::from_cents(14400), std::string("green")};
  EXPECT_TRUE(satisfies(item("a", 1800, "bright green"), c));
  EXPECT_TRUE(satisfies(item("a", 14400, "Green"), c));
  EXPECT_FALSE(satisfies(item("a", 1799, "green"), c));
  EXPECT_FALSE(satisfies(item("a", 14401, "green"), c));
  EXPECT_FALSE(satisfies(item("a", 2000, "greenish"), c));
  EXPECT_FALSE(satisfies(item("a", 2000), c));
  ColorVocabulary v;
  ConstraintSet gray{std::nullopt, std::nullopt, std::string("gray")};
  EXPECT_TRUE(satisfies(item("a", 1, "dark grey"), gray, &v));
  EXPECT_FALSE(satisfies(item("a", 1, "dark grey"), gray));
}

TEST(Validate, Examples) {
  CatalogSnapshot catalog({item("a", 5000, "red")}, 1);
  auto inverted = validate({Money::from_cents(14400), Money::from_cents(1800), std::nullopt}, catalog);
  EXPECT_FALSE(inverted.valid());
  EXPECT_TRUE(inverted.has(IssueCode::ConsistencyViolation));

  auto negative = validate({Money::from_cents(-500), std::nullopt, std::nullopt}, catalog);
  EXPECT_FALSE(negative.valid());
  EXPECT_TRUE(negative.has(IssueCode::RangeViolation));

  auto zero = validate({std::nullopt, std::nullopt, std::string("chartreuse")}, catalog);
  EXPECT_TRUE(zero.valid());
  EXPECT_TRUE(zero.has(IssueCode::ZeroMatch));

  auto ok = validate({Money::from_cents(0), Money::from_cents(5000), std::string("red")}, catalog);
  EXPECT_TRUE(ok.valid());
  EXPECT_TRUE(ok.issues.empty());
  EXPECT_EQ(to_json(inverted)["status"], "rejected");
}

TEST(Validate, RejectedImpliesIssues) {
  CatalogSnapshot catalog({}, 0);
  for (std::int64_t lo : {-100, 0, 100}) {
    for (std::int64_t hi : {-100, 0, 100}) {
      auto r = validate({Money::from_cents(lo), Money::from_cents(hi), std::nullopt}, catalog);
      if (!r.valid()) EXPECT_FALSE(r.issues.empty());
      EXPECT_EQ(r.valid(), lo >= 0 && hi >= 0 && lo <= hi);
    }
  }
}

TEST(ConstraintJson, SchemaAndParsing) {
  auto schema = constraint_function_schema();
  EXPECT_EQ(schema["name"], "get_user_recommendations");
  const auto& props = schema["parameters"]["properties"];
  EXPECT_EQ(props["lowest_price"]["type"], "number");
  EXPECT_EQ(props["highest_price"]["type"], "number");
  EXPECT_EQ(props["color"]["type"], "string");

  auto c = constraints_from_json(nlohmann::json::parse(R"({"lowest_price":18,"highest_price":144.5,"color":"Green"})"));
  EXPECT_EQ(c.lowest_price, Money::from_cents(1800));
  EXPECT_EQ(c.highest_price, Money::from_cents(14450));
  EXPECT_EQ(c.color, "green");
  EXPECT_EQ(constraints_from_json(to_json(c)), c);
  EXPECT_ERRC(constraints_from_json(nlohmann::json::parse(R"({"lowest_price":"cheap"})")), Errc::InvalidConfig);
  EXPECT_TRUE(constraints_from_json(nlohmann::json::parse(R"({"color":null})")).empty());
}
