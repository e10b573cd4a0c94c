#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "testutil.hpp"
#include "tier/schema.hpp"

using namespace tier;

namespace {

const char* kNativeDoc = R"([
  {"name": "Get_weather",
   "parameters": [
     {"name": "time", "type": "string", "required": true},
     {"name": "location", "type": "string", "required": true}
   ],
   "returns": {"type": "string"}}
])";

} // namespace

TEST_CASE("native document loads with two required params") {
    ToolRegistry reg = load_registry(kNativeDoc, SchemaDialect::Native);
    REQUIRE(reg.size() == 1);
    const FunctionSchema* schema = reg.lookup("Get_weather");
    REQUIRE(schema != nullptr);
    REQUIRE(schema->parameters.size() == 2);
    CHECK(schema->parameters[0].name == "time");
    CHECK(schema->parameters[0].required);
    CHECK(schema->parameters[1].required);
    CHECK(schema->returns_dtype == Dtype::String);
}

TEST_CASE("lookup misses are values, not errors") {
    ToolRegistry reg = load_registry(kNativeDoc, SchemaDialect::Native);
    CHECK(reg.lookup("Get_wether") == nullptr);
    ToolRegistry empty = load_registry("[]", SchemaDialect::Native);
    CHECK(empty.lookup("anything") == nullptr);
}

TEST_CASE("toolace: required list wins over a declared default") {
    const char* doc = R"([
      {"name": "F",
       "parameters": {
         "type": "dict",
         "properties": {
           "units": {"type": "string", "default": "C"},
           "city": {"type": "string"}
         },
         "required": ["units", "city"]
       }}
    ])";
    ToolRegistry reg = load_registry(doc, SchemaDialect::Toolace);
    const FunctionSchema* schema = reg.lookup("F");
    REQUIRE(schema != nullptr);
    const ParameterSpec* units = schema->find_param("units");
    REQUIRE(units != nullptr);
    CHECK(units->required);
    CHECK_FALSE(units->default_value.has_value()); // default discarded
    CHECK(schema->find_param("city")->required);
}

TEST_CASE("xlam: default presence decides the partition") {
    const char* doc = R"([
      {"name": "F",
       "parameters": {
         "city": {"type": "string"},
         "limit": {"type": "integer", "default": 10}
       }}
    ])";
    ToolRegistry reg = load_registry(doc, SchemaDialect::Xlam);
    const FunctionSchema* schema = reg.lookup("F");
    REQUIRE(schema != nullptr);
    CHECK(schema->find_param("city")->required);
    const ParameterSpec* limit = schema->find_param("limit");
    CHECK_FALSE(limit->required);
    REQUIRE(limit->default_value.has_value());
    CHECK(*limit->default_value == Json(10));
}

TEST_CASE("derive_required_partition rules") {
    RawParameter raw;
    raw.name = "p";
    raw.dtype = Dtype::String;

    SUBCASE("toolace, listed, no default") {
        raw.in_required_list = true;
        ParameterSpec spec = derive_required_partition(raw, SchemaDialect::Toolace);
        CHECK(spec.required);
    }
    SUBCASE("xlam, default present") {
        raw.default_value = Json("x");
        ParameterSpec spec = derive_required_partition(raw, SchemaDialect::Xlam);
        CHECK_FALSE(spec.required);
        CHECK(*spec.default_value == Json("x"));
    }
    SUBCASE("xlam, no default") {
        ParameterSpec spec = derive_required_partition(raw, SchemaDialect::Xlam);
        CHECK(spec.required);
    }
    SUBCASE("native conflict: required flag and default") {
        raw.required_flag = true;
        raw.default_value = Json("x");
        CHECK_THROWS_WITH_AS(derive_required_partition(raw, SchemaDialect::Native),
                             doctest::Contains("ConflictingDeclaration"), Error);
    }
}

TEST_CASE("load errors carry their codes") {
    CHECK_THROWS_WITH_AS(load_registry("not json", SchemaDialect::Native),
                         doctest::Contains("MalformedSchemaDocument"), Error);
    CHECK_THROWS_WITH_AS(
        load_registry(R"([{"name":"A","parameters":[]},{"name":"A","parameters":[]}])",
                      SchemaDialect::Native),
        doctest::Contains("DuplicateToolName"), Error);
    CHECK_THROWS_WITH_AS(
        load_registry(R"([{"name":"A","parameters":[{"name":"x","type":"decimal"}]}])",
                      SchemaDialect::Native),
        doctest::Contains("UnknownDtype"), Error);
}

TEST_CASE("unknown fields are ignored with a warning") {
    const char* doc = R"([{"name": "A", "parameters": [], "category": "misc"}])";
    ToolRegistry reg = load_registry(doc, SchemaDialect::Native);
    REQUIRE(reg.size() == 1);
    REQUIRE(reg.warnings().size() == 1);
    CHECK(reg.warnings()[0].find("category") != std::string::npos);
}

TEST_CASE("load-serialize-load is the identity on the shipped registry") {
    ToolRegistry first =
        load_registry(testutil::slurp(testutil::data_path("registry.json")), SchemaDialect::Native);
    ToolRegistry second = load_registry(first.to_json().dump(), SchemaDialect::Native);
    CHECK(first.to_json() == second.to_json());
    REQUIRE(first.size() == second.size());
    for (const auto& name : first.names()) {
        const FunctionSchema* a = first.lookup(name);
        const FunctionSchema* b = second.lookup(name);
        REQUIRE(b != nullptr);
        REQUIRE(a->parameters.size() == b->parameters.size());
        for (std::size_t i = 0; i < a->parameters.size(); ++i) {
            CHECK(a->parameters[i].name == b->parameters[i].name);
            CHECK(a->parameters[i].dtype == b->parameters[i].dtype);
            CHECK(a->parameters[i].required == b->parameters[i].required);
            CHECK(a->parameters[i].default_value == b->parameters[i].default_value);
        }
        CHECK(a->returns_dtype == b->returns_dtype);
    }
}

TEST_CASE("xlam dialect soundness: required iff no default") {
    // randomized instances of the xlam rule
    testutil::Rng rng(20260811);
    for (int trial = 0; trial < 50; ++trial) {
        Json params = Json::object();
        int n = rng.uniform_int(1, 6);
        std::vector<bool> has_default;
        for (int i = 0; i < n; ++i) {
            Json rec{{"type", "integer"}};
            bool with_default = rng.uniform() < 0.5;
            if (with_default) rec["default"] = rng.uniform_int(0, 99);
            params["p" + std::to_string(i)] = rec;
            has_default.push_back(with_default);
        }
        Json doc = Json::array({Json{{"name", "T"}, {"parameters", params}}});
        ToolRegistry reg = load_registry(doc.dump(), SchemaDialect::Xlam);
        const FunctionSchema* schema = reg.lookup("T");
        for (int i = 0; i < n; ++i) {
            const ParameterSpec* spec = schema->find_param("p" + std::to_string(i));
            REQUIRE(spec != nullptr);
            CHECK(spec->required == !has_default[static_cast<std::size_t>(i)]);
            CHECK(spec->required == !spec->default_value.has_value());
        }
    }
}

TEST_CASE("nested native properties load recursively") {
    const char* doc = R"([
      {"name": "Book",
       "parameters": [
         {"name": "details", "type": "object", "required": true, "properties": [
           {"name": "a", "type": "string", "required": true},
           {"name": "b", "type": "integer", "required": false, "default": 3}
         ]}
       ]}
    ])";
    ToolRegistry reg = load_registry(doc, SchemaDialect::Native);
    const ParameterSpec* details = reg.lookup("Book")->find_param("details");
    REQUIRE(details != nullptr);
    REQUIRE(details->nested.size() == 2);
    CHECK(details->find_nested("a")->required);
    CHECK(*details->find_nested("b")->default_value == Json(3));
}
