#include "tier/executor.hpp"

#include <algorithm>
#include <set>

namespace tier {

std::string tool_error_kind_name(ToolError::Kind kind) {
    switch (kind) {
        case ToolError::Kind::UnknownTool: return "UnknownTool";
        case ToolError::Kind::ArgumentRejected: return "ArgumentRejected";
        case ToolError::Kind::RuntimeFault: return "RuntimeFault";
        case ToolError::Kind::UnresolvedReference: return "UnresolvedReference";
    }
    return "RuntimeFault";
}

namespace {

Json resolve_value(const ArgValue& value, const std::map<int, Json>& prior_outputs) {
    if (value.is_ref()) {
        auto it = prior_outputs.find(value.ref_target());
        if (it == prior_outputs.end())
            throw Error("UnresolvedReference",
                        "output of call " + std::to_string(value.ref_target()) + " is unavailable");
        return it->second;
    }
    if (value.is_object()) {
        Json o = Json::object();
        for (const auto& [k, v] : value.as_object()) o[k] = resolve_value(v, prior_outputs);
        return o;
    }
    if (value.is_array()) {
        Json a = Json::array();
        for (const auto& v : value.as_array()) a.push_back(resolve_value(v, prior_outputs));
        return a;
    }
    return value.to_json();
}

} // namespace

Json resolve_arguments(const ToolCall& call, const std::map<int, Json>& prior_outputs) {
    Json resolved = Json::object();
    for (const auto& [name, value] : call.args) resolved[name] = resolve_value(value, prior_outputs);
    return resolved;
}

ExecutionTrace execute_sequence(const ToolCallSequence& seq, const ToolBackend& backend) {
    ExecutionTrace trace;
    if (seq.is_no_call) {
        trace.all_succeeded = true;
        trace.final_answer = FinalAnswer{true, Json()};
        return trace;
    }

    std::map<int, Json> outputs;
    std::set<int> failed;
    for (const auto& call : seq.calls) {
        ExecutionStep step;
        step.call_id = call.id;
        step.tool_name = call.tool_name;

        std::vector<int> deps;
        for (const auto& [_, v] : call.args) v.collect_refs(deps);
        const bool blocked = std::any_of(deps.begin(), deps.end(),
                                         [&](int d) { return failed.count(d) > 0; });
        if (blocked) {
            step.resolved_args = Json::object();
            step.outcome = ToolError{ToolError::Kind::UnresolvedReference,
                                     "a dependency of call " + std::to_string(call.id) + " failed"};
            failed.insert(call.id);
            trace.all_succeeded = false;
            trace.steps.push_back(std::move(step));
            continue;
        }

        step.resolved_args = resolve_arguments(call, outputs);
        step.outcome = backend.invoke(call.tool_name, step.resolved_args);
        if (outcome_ok(step.outcome)) {
            outputs[call.id] = std::get<Json>(step.outcome);
        } else {
            failed.insert(call.id);
            trace.all_succeeded = false;
        }
        trace.steps.push_back(std::move(step));
    }

    if (trace.all_succeeded) trace.final_answer = final_answer(trace, seq.return_mode);
    return trace;
}

FinalAnswer final_answer(const ExecutionTrace& trace, ReturnMode mode) {
    if (trace.steps.empty() && trace.all_succeeded) return FinalAnswer{true, Json()};
    if (!trace.all_succeeded)
        throw Error("AnswerUnavailable", "the sequence did not execute fully");
    if (mode == ReturnMode::One) return FinalAnswer{false, std::get<Json>(trace.steps.back().outcome)};
    Json all = Json::object();
    for (const auto& step : trace.steps)
        all[std::to_string(step.call_id)] = std::get<Json>(step.outcome);
    return FinalAnswer{false, all};
}

Json ExecutionTrace::to_json() const {
    Json doc;
    Json steps_doc = Json::array();
    for (const auto& step : steps) {
        Json rec;
        rec["call_id"] = step.call_id;
        rec["tool"] = step.tool_name;
        rec["args"] = step.resolved_args;
        if (outcome_ok(step.outcome)) {
            rec["ok"] = true;
            rec["output"] = std::get<Json>(step.outcome);
        } else {
            const auto& err = std::get<ToolError>(step.outcome);
            rec["ok"] = false;
            rec["error"] = Json{{"kind", tool_error_kind_name(err.kind)}, {"message", err.message}};
        }
        steps_doc.push_back(rec);
    }
    doc["steps"] = steps_doc;
    doc["all_succeeded"] = all_succeeded;
    if (final_answer) {
        if (final_answer->no_call)
            doc["final_answer"] = "NO_CALL";
        else
            doc["final_answer"] = final_answer->value;
    }
    return doc;
}

// ---------------------------------------------------------------------------
// Echo backend

namespace {

void fill_defaults(Json& args, const std::vector<ParameterSpec>& specs) {
    for (const auto& spec : specs) {
        if (!spec.required && spec.default_value && !args.contains(spec.name))
            args[spec.name] = *spec.default_value;
        if (!spec.nested.empty() && args.contains(spec.name) && args[spec.name].is_object())
            fill_defaults(args[spec.name], spec.nested);
    }
}

std::optional<std::string> first_missing_required(const Json& args,
                                                  const std::vector<ParameterSpec>& specs,
                                                  const std::string& path) {
    for (const auto& spec : specs) {
        if (spec.required && !args.contains(spec.name)) return path + spec.name;
        if (!spec.nested.empty() && args.contains(spec.name) && args[spec.name].is_object()) {
            auto missing = first_missing_required(args[spec.name], spec.nested, path + spec.name + ".");
            if (missing) return missing;
        }
    }
    return std::nullopt;
}

class EchoBackend : public ToolBackend {
public:
    explicit EchoBackend(const ToolRegistry& registry) : registry_(registry) {}

    ToolOutcome invoke(const std::string& tool_name, const Json& args) const override {
        const FunctionSchema* schema = registry_.lookup(tool_name);
        if (!schema)
            return ToolError{ToolError::Kind::UnknownTool, "no such tool: " + tool_name};
        if (auto missing = first_missing_required(args, schema->parameters, ""))
            return ToolError{ToolError::Kind::ArgumentRejected,
                             tool_name + " requires parameter '" + *missing + "'"};
        Json echoed = args;
        fill_defaults(echoed, schema->parameters);
        return Json{{"tool", tool_name}, {"args", echoed}};
    }

private:
    const ToolRegistry& registry_;
};

} // namespace

std::unique_ptr<ToolBackend> make_echo_backend(const ToolRegistry& registry) {
    return std::make_unique<EchoBackend>(registry);
}

// ---------------------------------------------------------------------------
// Fixture backend

namespace {

class FixtureBackend : public ToolBackend {
public:
    explicit FixtureBackend(Json fixtures) : fx_(std::move(fixtures)) {
        if (!fx_.is_object()) throw Error("MalformedFixtures", "fixture document must be an object");
    }

    ToolOutcome invoke(const std::string& tool_name, const Json& args) const override {
        if (tool_name == "Get_current_location") return constant("current_location");
        if (tool_name == "Get_current_time" || tool_name == "GetTime") return constant("current_time");
        if (tool_name == "GetDate") return constant("current_date");
        if (tool_name == "Get_weather") return weather(args);
        if (tool_name == "Find_Restaurants_by_Location")
            return scan("restaurants", "location", args, "location");
        if (tool_name == "Filter_Restaurants_by_Cuisine") return filter_cuisine(args);
        if (tool_name == "Filter_Restaurants_by_ratings") return filter_ratings(args);
        if (tool_name == "Filter_Restaurants_by_Opening_Hours") return filter_hours(args);
        if (tool_name == "List_Restaurant_Names") return list_names(args);
        if (tool_name == "Get_Crypto_Price") return crypto_price(args);
        if (tool_name == "Currency_conversion_API") return convert_currency(args);
        if (tool_name == "Find_Dealerships_by_Location")
            return scan("dealerships", "location", args, "location");
        if (tool_name == "Get_Car_Listing_by_Dealerships") return car_listings(args);
        if (tool_name == "BookHotel") return book_hotel(args);
        return ToolError{ToolError::Kind::UnknownTool, "no such tool: " + tool_name};
    }

private:
    Json fx_;

    static ToolError missing(const std::string& name) {
        return ToolError{ToolError::Kind::ArgumentRejected, "missing required argument '" + name + "'"};
    }
    static ToolError fault(const std::string& msg) {
        return ToolError{ToolError::Kind::RuntimeFault, msg};
    }

    ToolOutcome constant(const std::string& key) const {
        if (!fx_.contains(key)) return fault("fixture constant '" + key + "' is absent");
        return fx_[key];
    }

    static std::optional<std::string> get_string(const Json& args, const std::string& name) {
        if (!args.contains(name) || !args[name].is_string()) return std::nullopt;
        return args[name].get<std::string>();
    }

    ToolOutcome weather(const Json& args) const {
        auto time = get_string(args, "time");
        if (!time) return missing("time");
        auto location = get_string(args, "location");
        if (!location) return missing("location");
        for (const auto& row : fx_.value("weather", Json::array()))
            if (row["location"] == *location && row["time"] == *time) return row["report"];
        return fault("no weather fixture for " + *location + " at " + *time);
    }

    ToolOutcome scan(const std::string& table, const std::string& field, const Json& args,
                     const std::string& arg_name) const {
        auto key = get_string(args, arg_name);
        if (!key) return missing(arg_name);
        Json out = Json::array();
        for (const auto& row : fx_.value(table, Json::array()))
            if (row[field] == *key) out.push_back(row);
        return out;
    }

    static std::optional<Json> get_record_array(const Json& args, const std::string& name) {
        if (!args.contains(name) || !args[name].is_array()) return std::nullopt;
        return args[name];
    }

    ToolOutcome filter_cuisine(const Json& args) const {
        auto rows = get_record_array(args, "restaurants");
        if (!rows) return missing("restaurants");
        auto cuisine = get_string(args, "cuisine");
        if (!cuisine) return missing("cuisine");
        Json out = Json::array();
        for (const auto& row : *rows)
            if (row.is_object() && row.value("cuisine", "") == *cuisine) out.push_back(row);
        return out;
    }

    ToolOutcome filter_ratings(const Json& args) const {
        auto rows = get_record_array(args, "restaurants");
        if (!rows) return missing("restaurants");
        if (!args.contains("ratings") || !args["ratings"].is_number()) return missing("ratings");
        const double threshold = args["ratings"].get<double>();
        Json out = Json::array();
        for (const auto& row : *rows)
            if (row.is_object() && row.contains("rating") && row["rating"].is_number() &&
                row["rating"].get<double>() > threshold)
                out.push_back(row);
        return out;
    }

    ToolOutcome filter_hours(const Json& args) const {
        auto rows = get_record_array(args, "restaurants");
        if (!rows) return missing("restaurants");
        auto time = get_string(args, "time");
        if (!time) return missing("time");
        Json out = Json::array();
        for (const auto& row : *rows) {
            if (!row.is_object() || !row.contains("hours")) continue;
            const Json& hours = row["hours"];
            const std::string open = hours.value("open", "");
            const std::string close = hours.value("close", "");
            // "HH:MM" strings compare correctly in lexicographic order
            if (open <= *time && *time < close) out.push_back(row);
        }
        return out;
    }

    ToolOutcome list_names(const Json& args) const {
        auto rows = get_record_array(args, "restaurants");
        if (!rows) return missing("restaurants");
        Json out = Json::array();
        for (const auto& row : *rows)
            if (row.is_object() && row.contains("name")) out.push_back(row["name"]);
        return out;
    }

    ToolOutcome crypto_price(const Json& args) const {
        auto ticker = get_string(args, "ticker");
        if (!ticker) return missing("ticker");
        auto date = get_string(args, "price_time");
        if (!date) return missing("price_time");
        for (const auto& row : fx_.value("crypto_prices", Json::array()))
            if (row["ticker"] == *ticker && row["date"] == *date) return row["usd"];
        return fault("no price fixture for " + *ticker + " on " + *date);
    }

    ToolOutcome convert_currency(const Json& args) const {
        if (!args.contains("amount") || !args["amount"].is_number()) return missing("amount");
        auto from = get_string(args, "from_currency");
        if (!from) return missing("from_currency");
        auto to = get_string(args, "to_currency");
        if (!to) return missing("to_currency");
        auto date = get_string(args, "price_time");
        if (!date) return missing("price_time");
        for (const auto& row : fx_.value("fx_rates", Json::array()))
            if (row["from"] == *from && row["to"] == *to && row["date"] == *date)
                return Json(args["amount"].get<double>() * row["rate"].get<double>());
        return fault("no fx fixture for " + *from + "->" + *to + " on " + *date);
    }

    ToolOutcome car_listings(const Json& args) const {
        auto dealers = get_record_array(args, "dealerships");
        if (!dealers) return missing("dealerships");
        std::vector<std::string> names;
        for (const auto& d : *dealers) {
            if (d.is_string()) names.push_back(d.get<std::string>());
            else if (d.is_object() && d.contains("name")) names.push_back(d["name"].get<std::string>());
        }
        Json out = Json::array();
        for (const auto& row : fx_.value("car_listings", Json::array()))
            for (const auto& n : names)
                if (row["dealership"] == n) out.push_back(row);
        return out;
    }

    // Stateless confirmation record; nothing is persisted.
    ToolOutcome book_hotel(const Json& args) const {
        for (const char* req : {"hotel_id", "number_of_nights", "check_details", "number_of_people",
                                "personal_details", "billing_details"})
            if (!args.contains(req)) return missing(req);
        Json confirmation;
        confirmation["status"] = "confirmed";
        confirmation["hotel_id"] = args["hotel_id"];
        confirmation["check_in"] = args["check_details"].is_object()
                                       ? args["check_details"].value("check_in", Json())
                                       : Json();
        confirmation["check_out"] = args["check_details"].is_object()
                                        ? args["check_details"].value("check_out", Json())
                                        : Json();
        confirmation["nights"] = args["number_of_nights"];
        confirmation["guests"] = args["number_of_people"];
        confirmation["guest_name"] = args["personal_details"].is_object()
                                         ? args["personal_details"].value("name", Json())
                                         : Json();
        return confirmation;
    }
};

} // namespace

std::unique_ptr<ToolBackend> make_fixture_backend(const Json& fixtures) {
    return std::make_unique<FixtureBackend>(fixtures);
}

} // namespace tier
