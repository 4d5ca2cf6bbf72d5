#include <gtest/gtest.h>

#include <filesystem>

#include "compass/sparql/results.hpp"
#include "support/fixtures.hpp"

using namespace compass;
using namespace compass::sparql;

namespace {

std::vector<std::filesystem::path> conformance_documents() {
  std::vector<std::filesystem::path> out;
  for (const auto& entry : std::filesystem::directory_iterator(fixtures::data_path("results"))) {
    if (entry.path().extension() == ".srj") out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

ResultSet decode_fixture(const std::string& name) {
  return decode_results(fixtures::read_file(fixtures::data_path("results/" + name)));
}

std::string decode_error_path(std::string_view doc) {
  try {
    decode_results(doc);
  } catch (const DecodeError& e) {
    return e.path();
  }
  return "<no error>";
}

}  // namespace

TEST(DecodeResults, SuiteHasAtLeastTenDocuments) { EXPECT_GE(conformance_documents().size(), 10u); }

TEST(DecodeResults, ReencodeIsLossless) {
  for (const auto& path : conformance_documents()) {
    SCOPED_TRACE(path.filename().string());
    auto decoded = decode_results(fixtures::read_file(path.string()));
    auto encoded = encode_results(decoded);
    auto again = decode_results(encoded);
    EXPECT_EQ(again, decoded);
    EXPECT_EQ(encode_results(again), encoded);
  }
}

TEST(DecodeResults, MixedIrisAndTypedLiterals) {
  auto rs = decode_fixture("01_select_mixed.srj");
  ASSERT_EQ(rs.variables, (std::vector<std::string>{"paper", "year"}));
  ASSERT_EQ(rs.rows.size(), 3u);
  EXPECT_FALSE(rs.is_boolean());

  const auto& r0 = rs.rows[0];
  EXPECT_EQ(r0.at("paper"), RdfTerm::iri("http://orkg.org/orkg/resource/R1"));
  EXPECT_EQ(r0.at("year"), RdfTerm::literal("1998", xsd::kInteger));
  EXPECT_EQ(rs.rows[1].at("year").datatype, xsd::kDecimal);
  EXPECT_EQ(rs.rows[1].at("year").value, "2001.5");
  EXPECT_EQ(rs.rows[2].at("year").datatype, xsd::kDate);
  for (const auto& row : rs.rows) {
    EXPECT_TRUE(row.at("paper").is_iri());
    EXPECT_TRUE(row.at("year").is_literal());
  }
}

TEST(DecodeResults, EmptyBindingsKeepVariables) {
  auto rs = decode_fixture("02_empty_bindings.srj");
  EXPECT_EQ(rs.variables.size(), 3u);
  EXPECT_TRUE(rs.rows.empty());
}

TEST(DecodeResults, AskDocuments) {
  EXPECT_EQ(decode_fixture("03_ask_true.srj").boolean, true);
  EXPECT_EQ(decode_fixture("04_ask_false.srj").boolean, false);
}

TEST(DecodeResults, LanguageTagsAndUnbound) {
  auto langs = decode_fixture("05_language_tags.srj");
  EXPECT_EQ(langs.rows[0].at("label").lang, "de");
  EXPECT_EQ(langs.rows[1].at("label").lang, "en-GB");
  EXPECT_TRUE(langs.rows[1].at("label").datatype.empty());
  EXPECT_TRUE(langs.rows[2].at("label").lang.empty());

  auto sparse = decode_fixture("06_unbound.srj");
  EXPECT_EQ(sparse.rows[0].size(), 1u);
  EXPECT_EQ(sparse.rows[0].count("o"), 0u);
  EXPECT_TRUE(sparse.rows[2].empty());
}

TEST(DecodeResults, BlankNodes) {
  auto rs = decode_fixture("07_blank_nodes.srj");
  EXPECT_EQ(rs.rows[0].at("x"), RdfTerm::blank("b0"));
  EXPECT_TRUE(rs.rows[1].at("y").is_iri());
}

TEST(DecodeResults, LegacyTypedLiteral) {
  auto rs = decode_fixture("08_typed_literal_variants.srj");
  EXPECT_EQ(rs.rows[4].at("v"), RdfTerm::literal("-7", xsd::kInteger));
}

TEST(DecodeResults, ErrorPaths) {
  EXPECT_EQ(decode_error_path(R"({"results": {"bindings": []}})"), "/head");
  EXPECT_EQ(decode_error_path(R"({"head": {"vars": ["a"]}})"), "/results");
  EXPECT_EQ(decode_error_path(R"({"head": {"vars": ["a"]}, "results": {}})"), "/results/bindings");
  EXPECT_EQ(decode_error_path(R"({"head": {"vars": "a"}, "results": {"bindings": []}})"),
            "/head/vars");
  EXPECT_EQ(decode_error_path(
                R"({"head": {"vars": ["a"]}, "results": {"bindings": [{"b": {"type": "uri", "value": "x"}}]}})"),
            "/results/bindings/0/b");
  EXPECT_EQ(decode_error_path(
                R"({"head": {"vars": ["a"]}, "results": {"bindings": [{"a": {"type": "weird", "value": "x"}}]}})")
                .rfind("/results/bindings/0/a", 0),
            0u);
  EXPECT_EQ(decode_error_path(R"({"head": {}, "boolean": "yes"})"), "/boolean");
  EXPECT_EQ(decode_error_path("not json"), "");
}

TEST(EncodeResults, KeepsVariableOrder) {
  ResultSet rs;
  rs.variables = {"z", "a", "m"};
  rs.rows.push_back({{"a", RdfTerm::integer(3)}});
  auto doc = results_to_json(rs);
  EXPECT_EQ(doc["head"]["vars"], nlohmann::json({"z", "a", "m"}));
  EXPECT_EQ(results_from_json(doc), rs);
}
