#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "testutil.hpp"
#include "tier/executor.hpp"

#include <set>

using namespace tier;

namespace {

ToolRegistry demo_registry() {
    return load_registry(testutil::slurp(testutil::data_path("registry.json")),
                         SchemaDialect::Native);
}

Json demo_fixtures() {
    return Json::parse(testutil::slurp(testutil::data_path("fixtures.json")));
}

ToolCallSequence parse(const std::string& payload, ReturnMode mode = ReturnMode::One) {
    ParseOutcome outcome = parse_auto(payload, mode);
    REQUIRE(outcome.ok());
    return outcome.sequence();
}

} // namespace

TEST_CASE("resolve_arguments: substitution, identity, and failure") {
    ToolCall call;
    call.id = 2;
    call.tool_name = "F";
    call.args.emplace_back("location", ArgValue::from_ref(1));
    std::map<int, Json> prior{{1, Json("San Diego")}};
    Json resolved = resolve_arguments(call, prior);
    CHECK(resolved["location"] == "San Diego");

    ToolCall plain;
    plain.id = 0;
    plain.tool_name = "F";
    plain.args.emplace_back("x", ArgValue::from_integer(3));
    CHECK(resolve_arguments(plain, {}) == Json{{"x", 3}});

    CHECK_THROWS_WITH_AS(resolve_arguments(call, {}), doctest::Contains("UnresolvedReference"),
                         Error);
}

TEST_CASE("resolve_arguments reaches into nested composites") {
    ToolCall call;
    call.id = 1;
    call.tool_name = "F";
    call.args.emplace_back(
        "spec", ArgValue::from_object({{"src", ArgValue::from_ref(0)},
                                       {"tag", ArgValue::from_string("keep")}}));
    std::map<int, Json> prior{{0, Json(42)}};
    Json resolved = resolve_arguments(call, prior);
    CHECK(resolved["spec"]["src"] == 42);
    CHECK(resolved["spec"]["tag"] == "keep");
}

TEST_CASE("funnel over the fixtures: time and location feed the weather call") {
    auto backend = make_fixture_backend(demo_fixtures());
    ExecutionTrace trace = execute_sequence(parse(R"({
      "0": {"GetTime": {}},
      "1": {"Get_current_location": {}},
      "2": {"Get_weather": {"time": "API_RESPONSE_0", "location": "API_RESPONSE_1"}}
    })"), *backend);
    CHECK(trace.all_succeeded);
    REQUIRE(trace.steps.size() == 3);
    REQUIRE(trace.final_answer.has_value());
    CHECK(trace.final_answer->value == "68F, clear skies");
}

TEST_CASE("NO-CALL executes to an empty, successful trace") {
    auto backend = make_fixture_backend(demo_fixtures());
    ExecutionTrace trace = execute_sequence(parse("{}"), *backend);
    CHECK(trace.all_succeeded);
    CHECK(trace.steps.empty());
    REQUIRE(trace.final_answer.has_value());
    CHECK(trace.final_answer->no_call);
}

TEST_CASE("failure propagation follows the reference DAG") {
    auto backend = make_fixture_backend(demo_fixtures());
    // A ok; B faults (unknown fx pair); C depends on B; D independent
    ExecutionTrace trace = execute_sequence(parse(R"({
      "0": {"Get_Crypto_Price": {"ticker": "BTC", "price_time": "2026-01-11"}},
      "1": {"Currency_conversion_API": {"amount": "API_RESPONSE_0", "from_currency": "USD",
                                         "to_currency": "CHF", "price_time": "2026-01-11"}},
      "2": {"Currency_conversion_API": {"amount": "API_RESPONSE_1", "from_currency": "USD",
                                         "to_currency": "EUR", "price_time": "2026-01-11"}},
      "3": {"Get_current_location": {}}
    })"), *backend);
    CHECK_FALSE(trace.all_succeeded);
    REQUIRE(trace.steps.size() == 4);
    CHECK(outcome_ok(trace.steps[0].outcome));
    REQUIRE_FALSE(outcome_ok(trace.steps[1].outcome));
    CHECK(std::get<ToolError>(trace.steps[1].outcome).kind == ToolError::Kind::RuntimeFault);
    REQUIRE_FALSE(outcome_ok(trace.steps[2].outcome));
    CHECK(std::get<ToolError>(trace.steps[2].outcome).kind ==
          ToolError::Kind::UnresolvedReference);
    CHECK(outcome_ok(trace.steps[3].outcome)); // independent call still ran
    CHECK_FALSE(trace.final_answer.has_value());

    // oracle: UnresolvedReference iff some transitive dependency errored;
    // deps here are 1 -> {0}, 2 -> {1}, computed by reachability from the
    // directly faulting call 1
    const std::map<int, std::vector<int>> deps{{0, {}}, {1, {0}}, {2, {1}}, {3, {}}};
    std::set<int> tainted{1};
    for (const auto& step : trace.steps) {
        bool depends_on_error = false;
        for (int d : deps.at(step.call_id))
            if (tainted.count(d)) depends_on_error = true;
        if (depends_on_error) tainted.insert(step.call_id);
        const bool is_unresolved =
            !outcome_ok(step.outcome) &&
            std::get<ToolError>(step.outcome).kind == ToolError::Kind::UnresolvedReference;
        CHECK(is_unresolved == depends_on_error);
    }
}

TEST_CASE("final_answer under both modes") {
    auto backend = make_fixture_backend(demo_fixtures());
    ExecutionTrace chain = execute_sequence(parse(R"({
      "0": {"Get_current_location": {}},
      "1": {"Find_Dealerships_by_Location": {"location": "API_RESPONSE_0"}},
      "2": {"Get_Car_Listing_by_Dealerships": {"dealerships": "API_RESPONSE_1"}}
    })"), *backend);
    REQUIRE(chain.all_succeeded);
    FinalAnswer one = final_answer(chain, ReturnMode::One);
    CHECK(one.value.is_array());
    CHECK(one.value.size() == 3); // Harbor Auto x2 + Mesa Motors x1

    ExecutionTrace parallel = execute_sequence(
        parse(R"({"0": {"GetTime": {}}, "1": {"Get_current_location": {}}})", ReturnMode::All),
        *backend);
    REQUIRE(parallel.all_succeeded);
    REQUIRE(parallel.final_answer.has_value());
    CHECK(parallel.final_answer->value == Json{{"0", "18:30"}, {"1", "San Diego"}});

    ExecutionTrace failing = execute_sequence(
        parse(R"({"0": {"Get_weather": {"time": "03:00", "location": "Nowhere"}}})"), *backend);
    CHECK_THROWS_WITH_AS(final_answer(failing, ReturnMode::One),
                         doctest::Contains("AnswerUnavailable"), Error);
}

TEST_CASE("echo backend materializes declared defaults") {
    ToolRegistry reg = demo_registry();
    auto echo = make_echo_backend(reg);

    ToolOutcome omitted = echo->invoke(
        "Get_Crypto_Price", Json{{"ticker", "BTC"}, {"price_time", "2026-01-11"}});
    REQUIRE(outcome_ok(omitted));
    CHECK(std::get<Json>(omitted)["args"]["currency"] == "USD");

    ToolOutcome supplied = echo->invoke(
        "Get_Crypto_Price",
        Json{{"ticker", "BTC"}, {"price_time", "2026-01-11"}, {"currency", "USD"}});
    REQUIRE(outcome_ok(supplied));
    CHECK(std::get<Json>(omitted) == std::get<Json>(supplied));

    ToolOutcome unknown = echo->invoke("G", Json::object());
    REQUIRE_FALSE(outcome_ok(unknown));
    CHECK(std::get<ToolError>(unknown).kind == ToolError::Kind::UnknownTool);

    ToolOutcome rejected = echo->invoke("Get_weather", Json{{"time", "18:30"}});
    REQUIRE_FALSE(outcome_ok(rejected));
    CHECK(std::get<ToolError>(rejected).kind == ToolError::Kind::ArgumentRejected);
}

TEST_CASE("fixture filters: subsets, empties, faults") {
    auto backend = make_fixture_backend(demo_fixtures());

    ToolOutcome sd = backend->invoke("Find_Restaurants_by_Location", Json{{"location", "San Diego"}});
    REQUIRE(outcome_ok(sd));
    const Json& rows = std::get<Json>(sd);
    CHECK(rows.size() == 7);

    ToolOutcome japanese =
        backend->invoke("Filter_Restaurants_by_Cuisine", Json{{"restaurants", rows}, {"cuisine", "Japanese"}});
    REQUIRE(outcome_ok(japanese));
    CHECK(std::get<Json>(japanese).size() == 3);
    for (const auto& r : std::get<Json>(japanese)) CHECK(r["cuisine"] == "Japanese");

    ToolOutcome empty = backend->invoke(
        "Filter_Restaurants_by_Cuisine",
        Json{{"restaurants", Json::array()}, {"cuisine", "Japanese"}});
    REQUIRE(outcome_ok(empty));
    CHECK(std::get<Json>(empty).empty());

    ToolOutcome fault = backend->invoke(
        "Currency_conversion_API", Json{{"amount", 10.0}, {"from_currency", "USD"},
                                        {"to_currency", "CHF"}, {"price_time", "2026-01-11"}});
    REQUIRE_FALSE(outcome_ok(fault));
    CHECK(std::get<ToolError>(fault).kind == ToolError::Kind::RuntimeFault);
}

TEST_CASE("commutativity witness: conjunctive filters in either order") {
    auto backend = make_fixture_backend(demo_fixtures());
    const char* option_a = R"({
      "0": {"Find_Restaurants_by_Location": {"location": "San Diego"}},
      "1": {"Filter_Restaurants_by_Cuisine": {"restaurants": "API_RESPONSE_0", "cuisine": "Japanese"}},
      "2": {"Filter_Restaurants_by_ratings": {"restaurants": "API_RESPONSE_1", "ratings": 4.2}}
    })";
    const char* option_b = R"({
      "0": {"Find_Restaurants_by_Location": {"location": "San Diego"}},
      "1": {"Filter_Restaurants_by_ratings": {"restaurants": "API_RESPONSE_0", "ratings": 4.2}},
      "2": {"Filter_Restaurants_by_Cuisine": {"restaurants": "API_RESPONSE_1", "cuisine": "Japanese"}}
    })";
    ExecutionTrace a = execute_sequence(parse(option_a), *backend);
    ExecutionTrace b = execute_sequence(parse(option_b), *backend);
    REQUIRE(a.all_succeeded);
    REQUIRE(b.all_succeeded);
    CHECK(a.final_answer->value == b.final_answer->value);
    CHECK(a.final_answer->value.size() == 2); // the two top-rated Japanese spots
}

TEST_CASE("determinism: identical sequences, identical traces") {
    auto backend = make_fixture_backend(demo_fixtures());
    const ToolCallSequence seq = parse(R"({
      "0": {"Get_current_location": {}},
      "1": {"Find_Restaurants_by_Location": {"location": "API_RESPONSE_0"}}
    })");
    ExecutionTrace first = execute_sequence(seq, *backend);
    ExecutionTrace second = execute_sequence(seq, *backend);
    CHECK(first.to_json() == second.to_json());
}

TEST_CASE("GetTime and Get_current_time alias one backend entry") {
    auto backend = make_fixture_backend(demo_fixtures());
    ToolOutcome a = backend->invoke("GetTime", Json::object());
    ToolOutcome b = backend->invoke("Get_current_time", Json::object());
    REQUIRE(outcome_ok(a));
    REQUIRE(outcome_ok(b));
    CHECK(std::get<Json>(a) == std::get<Json>(b));
}
