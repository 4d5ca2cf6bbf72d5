#include <gtest/gtest.h>

#include <map>
#include <random>

#include "compass/sparql/results.hpp"
#include "compass/viz/chart.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace compass;
using namespace compass::viz;
using sparql::RdfTerm;
namespace xsd = compass::sparql::xsd;

namespace {

sparql::ResultSet years_result(const std::vector<std::int64_t>& years) {
  sparql::ResultSet rs;
  rs.variables = {"paper", "year"};
  int i = 0;
  for (auto y : years) {
    rs.rows.push_back({{"paper", RdfTerm::iri("http://orkg.org/orkg/resource/P" + std::to_string(++i))},
                       {"year", RdfTerm::integer(y)}});
  }
  return rs;
}

Dataset two_columns(ColumnType a, ColumnType b) {
  Dataset d;
  d.columns = {{"a", a}, {"b", b}};
  return d;
}

const std::vector<std::int64_t> kStudyYears = {1998, 2001, 2003, 2010, 2011, 2014, 2021};

}  // namespace

TEST(Tabulate, IntegerDatatypeGivesIntegerColumn) {
  auto d = tabulate(years_result({2001, 1999}));
  ASSERT_EQ(d.columns.size(), 2u);
  EXPECT_EQ(d.columns[0].type, ColumnType::iri);
  EXPECT_EQ(d.columns[1].type, ColumnType::integer);
  EXPECT_EQ(d.rows[0][1], Cell(std::int64_t{2001}));
  EXPECT_NO_THROW(d.check_invariants());
}

TEST(Tabulate, EmptyResultKeepsColumns) {
  sparql::ResultSet rs;
  rs.variables = {"a", "b", "c"};
  auto d = tabulate(rs);
  EXPECT_EQ(d.columns.size(), 3u);
  EXPECT_TRUE(d.rows.empty());
}

TEST(Tabulate, MajorityRuleCoercesMinority) {
  sparql::ResultSet rs;
  rs.variables = {"v"};
  // 3 of 5 bound values are integers.
  for (const auto& term : {RdfTerm::integer(1), RdfTerm::literal("n/a"), RdfTerm::integer(2),
                           RdfTerm::literal("unknown"), RdfTerm::integer(3)}) {
    rs.rows.push_back({{"v", term}});
  }
  rs.rows.push_back({});
  auto d = tabulate(rs, {"SELECT ?v", "http://fixture", "2026-10-16T00:00:00.000Z", {}});
  EXPECT_EQ(d.columns[0].type, ColumnType::integer);
  EXPECT_EQ(d.rows[0][0], Cell(std::int64_t{1}));
  EXPECT_TRUE(is_missing(d.rows[1][0]));
  EXPECT_TRUE(is_missing(d.rows[3][0]));
  EXPECT_TRUE(is_missing(d.rows[5][0]));
  ASSERT_EQ(d.provenance.warnings.size(), 1u);
  EXPECT_NE(d.provenance.warnings[0].find("2 of 5"), std::string::npos);
  EXPECT_EQ(d.provenance.endpoint, "http://fixture");
  EXPECT_NO_THROW(d.check_invariants());
}

TEST(Tabulate, TieFallsBackToString) {
  sparql::ResultSet rs;
  rs.variables = {"v"};
  rs.rows = {{{"v", RdfTerm::integer(4)}}, {{"v", RdfTerm::literal("four")}}};
  auto d = tabulate(rs);
  EXPECT_EQ(d.columns[0].type, ColumnType::string);
  EXPECT_EQ(d.rows[0][0], Cell(std::string("4")));
  EXPECT_TRUE(d.provenance.warnings.empty());
}

TEST(Tabulate, LosslessForHomogeneousColumns) {
  for (const auto& name : {"01_select_mixed.srj", "05_language_tags.srj", "10_aggregate_counts.srj"}) {
    auto rs = sparql::decode_results(fixtures::read_file(fixtures::data_path(std::string("results/") + name)));
    auto d = tabulate(rs);
    for (std::size_t c = 0; c < d.columns.size(); ++c) {
      for (std::size_t r = 0; r < d.rows.size(); ++r) {
        const auto& term = rs.rows[r].at(d.columns[c].name);
        if (d.columns[c].type == ColumnType::string || d.columns[c].type == ColumnType::iri) {
          EXPECT_EQ(d.rows[r][c], Cell(term.value));
        } else if (d.columns[c].type == ColumnType::integer) {
          EXPECT_EQ(d.rows[r][c], Cell(std::stoll(term.value)));
        }
      }
    }
  }
}

TEST(Aggregate, DecadeOracleOverStudyYears) {
  // Brute force: bucket each year by integer division.
  std::map<std::string, std::int64_t> expected;
  for (auto y : kStudyYears) ++expected[std::to_string(y - y % 10) + "s"];
  ASSERT_EQ(expected, (std::map<std::string, std::int64_t>{
                          {"1990s", 1}, {"2000s", 2}, {"2010s", 3}, {"2020s", 1}}));

  auto out = aggregate(tabulate(years_result(kStudyYears)), {"year", Binning::decade},
                       {AggregateKind::count, "", ""});
  ASSERT_EQ(out.columns[0].name, "decade");
  ASSERT_EQ(out.rows.size(), expected.size());
  std::size_t i = 0;
  for (const auto& [label, count] : expected) {
    EXPECT_EQ(out.rows[i][0], Cell(label));
    EXPECT_EQ(out.rows[i][1], Cell(count));
    ++i;
  }
}

TEST(Aggregate, EmptyDatasetKeepsShape) {
  auto out = aggregate(two_columns(ColumnType::string, ColumnType::integer), {"a", Binning::none},
                       {AggregateKind::sum, "b", ""});
  EXPECT_EQ(out.columns.size(), 2u);
  EXPECT_EQ(out.columns[1].name, "sum_b");
  EXPECT_TRUE(out.rows.empty());
}

TEST(Aggregate, SingleGroupCountsAllRows) {
  auto d = two_columns(ColumnType::string, ColumnType::integer);
  for (int i = 0; i < 9; ++i) d.rows.push_back({std::string("same"), std::int64_t{i}});
  auto out = aggregate(d, {"a", Binning::none}, {AggregateKind::count, "", ""});
  ASSERT_EQ(out.rows.size(), 1u);
  EXPECT_EQ(out.rows[0][1], Cell(std::int64_t{9}));
}

TEST(Aggregate, MissingKeysFormLastGroup) {
  auto d = two_columns(ColumnType::integer, ColumnType::integer);
  d.rows = {{Cell{}, std::int64_t{1}}, {std::int64_t{1995}, std::int64_t{2}}, {Cell{}, std::int64_t{3}}};
  auto out = aggregate(d, {"a", Binning::decade}, {AggregateKind::count, "", ""});
  ASSERT_EQ(out.rows.size(), 2u);
  EXPECT_EQ(out.rows[0][0], Cell(std::string("1990s")));
  EXPECT_TRUE(is_missing(out.rows[1][0]));
  EXPECT_EQ(out.rows[1][1], Cell(std::int64_t{2}));
}

TEST(Aggregate, TypeMismatchNamesColumn) {
  auto d = two_columns(ColumnType::string, ColumnType::string);
  try {
    aggregate(d, {"a", Binning::none}, {AggregateKind::avg, "b", ""});
    FAIL() << "expected AggregationError";
  } catch (const AggregationError& e) {
    EXPECT_NE(std::string(e.what()).find("'b'"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("integer or decimal"), std::string::npos);
  }
  EXPECT_THROW(aggregate(d, {"zzz", Binning::none}, {AggregateKind::count, "", ""}),
               AggregationError);
}

TEST(Aggregate, DecadeOfNegativeYears) {
  EXPECT_EQ(decade_of(1999), 1990);
  EXPECT_EQ(decade_of(2000), 2000);
  EXPECT_EQ(decade_of(-1), -10);
  EXPECT_EQ(decade_of(-10), -10);
  EXPECT_EQ(year_of(Cell(std::string("2014-03-01"))), 2014);
  EXPECT_EQ(year_of(Cell(std::string("n/a"))), std::nullopt);
}

TEST(Aggregate, MatchesNestedLoopReference) {
  std::mt19937_64 rng(20261016);
  const std::vector<std::string> groups = {"g_str", "g_int", "g_dec", "g_bool", "g_date"};
  const std::vector<AggregateKind> kinds = {AggregateKind::count, AggregateKind::sum,
                                            AggregateKind::avg, AggregateKind::min,
                                            AggregateKind::max};
  for (int trial = 0; trial < 200; ++trial) {
    auto d = fixtures::random_dataset(rng, 100);
    for (const auto& g : groups) {
      for (auto binning : {Binning::none, Binning::decade}) {
        if (binning == Binning::decade && g == "g_bool") continue;
        for (auto kind : kinds) {
          for (const std::string m : {"", "m_int", "m_dec"}) {
            if (m.empty() && kind != AggregateKind::count) continue;
            GroupSpec gs{g, binning};
            MeasureSpec ms{kind, m, ""};
            ASSERT_EQ(aggregate(d, gs, ms), fixtures::reference_aggregate(d, gs, ms))
                << "trial " << trial << " group " << g << " measure " << to_string(kind) << " " << m;
          }
        }
      }
    }
  }
}

TEST(Aggregate, CountTotalsEqualRowCount) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    auto d = fixtures::random_dataset(rng, 100);
    auto out = aggregate(d, {"g_date", Binning::decade}, {AggregateKind::count, "", ""});
    std::int64_t total = 0;
    for (const auto& row : out.rows) total += std::get<std::int64_t>(row[1]);
    EXPECT_EQ(total, static_cast<std::int64_t>(d.rows.size()));
  }
}

TEST(ValidateChart, BarOverDecadeCounts) {
  auto d = two_columns(ColumnType::string, ColumnType::integer);
  d.columns = {{"decade", ColumnType::string}, {"count", ColumnType::integer}};
  ChartSpec bar{ChartKind::bar, XEncoding{"decade"}, {YEncoding{"count"}}, {}, "Per decade", {}};
  EXPECT_TRUE(validate_chart(bar, d).empty());
}

TEST(ValidateChart, NonexistentColumn) {
  auto d = two_columns(ColumnType::string, ColumnType::integer);
  ChartSpec spec{ChartKind::bar, XEncoding{"a"}, {YEncoding{"missing"}}, {}, "", {}};
  auto v = validate_chart(spec, d);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_NE(v[0].find("'missing'"), std::string::npos);
}

TEST(ValidateChart, PieWithTwoMeasures) {
  Dataset d;
  d.columns = {{"a", ColumnType::string}, {"b", ColumnType::integer}, {"c", ColumnType::decimal}};
  ChartSpec pie{ChartKind::pie, XEncoding{"a"}, {YEncoding{"b"}, YEncoding{"c"}}, {}, "", {}};
  auto v = validate_chart(pie, d);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_NE(v[0].find("pie requires exactly one category and one measure"), std::string::npos);
  pie.y.pop_back();
  EXPECT_TRUE(validate_chart(pie, d).empty());
}

TEST(ValidateChart, TableIgnoresEncodings) {
  auto d = two_columns(ColumnType::string, ColumnType::integer);
  ChartSpec table{ChartKind::table, XEncoding{"nope"}, {YEncoding{"nope"}}, "nope", "", {}};
  EXPECT_TRUE(validate_chart(table, d).empty());
}

TEST(DefaultChart, Rules) {
  EXPECT_EQ(default_chart(two_columns(ColumnType::string, ColumnType::integer)).kind, ChartKind::bar);
  EXPECT_EQ(default_chart(two_columns(ColumnType::date, ColumnType::decimal)).kind, ChartKind::line);
  Dataset one;
  one.columns = {{"only", ColumnType::integer}};
  EXPECT_EQ(default_chart(one).kind, ChartKind::table);
  Dataset wide;
  for (int i = 0; i < 5; ++i) wide.columns.push_back({"c" + std::to_string(i), ColumnType::string});
  EXPECT_EQ(default_chart(wide).kind, ChartKind::table);
}

TEST(DefaultChart, AlwaysValid) {
  std::mt19937_64 rng(99);
  const ColumnType types[] = {ColumnType::string, ColumnType::integer, ColumnType::decimal,
                              ColumnType::boolean, ColumnType::date, ColumnType::iri};
  std::uniform_int_distribution<int> pick(0, 5);
  std::uniform_int_distribution<int> width(0, 6);
  for (int trial = 0; trial < 500; ++trial) {
    Dataset d;
    const int w = width(rng);
    for (int c = 0; c < w; ++c) d.columns.push_back({"c" + std::to_string(c), types[pick(rng)]});
    auto spec = default_chart(d);
    EXPECT_TRUE(validate_chart(spec, d).empty()) << to_json(spec).dump();
  }
}

TEST(ChartJson, RoundTripAndErrors) {
  ChartSpec spec{ChartKind::stacked_bar, XEncoding{"year", Binning::decade},
                 {YEncoding{"n", AggregateKind::sum}}, "method", "Stacked", SortSpec{"n", true}};
  EXPECT_EQ(chart_from_json(to_json(spec)), spec);
  EXPECT_EQ(to_json(spec)["kind"], "stacked-bar");
  EXPECT_THROW(chart_from_json({{"kind", "donut"}}), ValidationError);
  EXPECT_THROW(chart_from_json(nlohmann::json::array()), ValidationError);
}

TEST(ChartDocument, InlinesColumns) {
  auto d = two_columns(ColumnType::string, ColumnType::integer);
  d.rows = {{std::string("x"), std::int64_t{1}}, {Cell{}, std::int64_t{2}}};
  auto doc = chart_document(default_chart(d, "t"), d);
  EXPECT_EQ(doc["chart_document_version"], kChartDocumentVersion);
  EXPECT_EQ(doc["spec"]["kind"], "bar");
  EXPECT_EQ(doc["data"][0]["values"], nlohmann::json({"x", nullptr}));
}

TEST(DatasetJson, RoundTrip) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 20; ++i) {
    auto d = fixtures::random_dataset(rng, 30);
    d.provenance = {"SELECT *", "http://e", "2026-10-16T00:00:00.000Z", {"w"}};
    EXPECT_EQ(dataset_from_json(to_json(d)), d);
  }
}

TEST(Csv, Rfc4180Quoting) {
  Dataset d;
  d.columns = {{"name", ColumnType::string}, {"n", ColumnType::integer}, {"ok", ColumnType::boolean}};
  d.rows = {{std::string("plain"), std::int64_t{1}, true},
            {std::string("a,b"), Cell{}, false},
            {std::string("say \"hi\"\nthere"), std::int64_t{-3}, Cell{}}};
  EXPECT_EQ(to_csv(d),
            "name,n,ok\r\n"
            "plain,1,true\r\n"
            "\"a,b\",,false\r\n"
            "\"say \"\"hi\"\"\nthere\",-3,\r\n");
}
