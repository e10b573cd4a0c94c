#include "tier/schema.hpp"

#include <algorithm>
#include <set>

namespace tier {

std::optional<Dtype> parse_dtype(const std::string& name) {
    if (name == "string") return Dtype::String;
    if (name == "integer") return Dtype::Integer;
    if (name == "float") return Dtype::Float;
    if (name == "boolean") return Dtype::Boolean;
    if (name == "object") return Dtype::Object;
    if (name == "array") return Dtype::Array;
    if (name == "any") return Dtype::Any;
    return std::nullopt;
}

std::string dtype_name(Dtype t) {
    switch (t) {
        case Dtype::String: return "string";
        case Dtype::Integer: return "integer";
        case Dtype::Float: return "float";
        case Dtype::Boolean: return "boolean";
        case Dtype::Object: return "object";
        case Dtype::Array: return "array";
        case Dtype::Any: return "any";
    }
    return "any";
}

const ParameterSpec* ParameterSpec::find_nested(const std::string& pname) const {
    for (const auto& p : nested)
        if (p.name == pname) return &p;
    return nullptr;
}

const ParameterSpec* FunctionSchema::find_param(const std::string& pname) const {
    for (const auto& p : parameters)
        if (p.name == pname) return &p;
    return nullptr;
}

ParameterSpec derive_required_partition(const RawParameter& raw, SchemaDialect dialect) {
    ParameterSpec spec;
    spec.name = raw.name;
    spec.dtype = raw.dtype;
    spec.description = raw.description;
    for (const auto& n : raw.nested)
        spec.nested.push_back(derive_required_partition(n, dialect));

    switch (dialect) {
        case SchemaDialect::Native:
            spec.required = raw.required_flag.value_or(false);
            if (spec.required && raw.default_value)
                throw Error("ConflictingDeclaration",
                            "parameter '" + raw.name + "' is required but declares a default");
            spec.default_value = raw.default_value;
            break;
        case SchemaDialect::Toolace:
            // Membership in the required list wins; a default declared on a
            // listed parameter is dropped.
            spec.required = raw.in_required_list;
            if (!spec.required) spec.default_value = raw.default_value;
            break;
        case SchemaDialect::Xlam:
            spec.required = !raw.default_value.has_value();
            spec.default_value = raw.default_value;
            break;
    }
    return spec;
}

const FunctionSchema* ToolRegistry::lookup(const std::string& name) const {
    auto it = schemas_.find(name);
    return it == schemas_.end() ? nullptr : &it->second;
}

std::vector<std::string> ToolRegistry::names() const {
    std::vector<std::string> out;
    out.reserve(schemas_.size());
    for (const auto& [n, _] : schemas_) out.push_back(n);
    return out;
}

namespace {

Dtype require_dtype(const Json& v, const std::string& context) {
    if (!v.is_string())
        throw Error("MalformedSchemaDocument", "non-string type in " + context);
    auto t = parse_dtype(v.get<std::string>());
    if (!t)
        throw Error("UnknownDtype",
                    "'" + v.get<std::string>() + "' in " + context);
    return *t;
}

void warn_unknown_fields(const Json& record, const std::set<std::string>& known,
                         const std::string& context, std::vector<std::string>& warnings) {
    for (auto it = record.begin(); it != record.end(); ++it) {
        if (!known.count(it.key()))
            warnings.push_back("ignored unknown field '" + it.key() + "' in " + context);
    }
}

RawParameter parse_native_param(const Json& p, const std::string& tool,
                                std::vector<std::string>& warnings) {
    if (!p.is_object() || !p.contains("name") || !p["name"].is_string())
        throw Error("MalformedSchemaDocument", "parameter record without a name in tool '" + tool + "'");
    RawParameter raw;
    raw.name = p["name"].get<std::string>();
    if (raw.name.empty())
        throw Error("MalformedSchemaDocument", "empty parameter name in tool '" + tool + "'");
    const std::string context = "parameter '" + raw.name + "' of tool '" + tool + "'";
    if (!p.contains("type"))
        throw Error("MalformedSchemaDocument", "missing type for " + context);
    raw.dtype = require_dtype(p["type"], context);
    if (p.contains("required")) {
        if (!p["required"].is_boolean())
            throw Error("MalformedSchemaDocument", "non-boolean required flag on " + context);
        raw.required_flag = p["required"].get<bool>();
    }
    if (p.contains("default")) raw.default_value = p["default"];
    if (p.contains("description") && p["description"].is_string())
        raw.description = p["description"].get<std::string>();
    if (p.contains("properties")) {
        if (!p["properties"].is_array())
            throw Error("MalformedSchemaDocument", "properties of " + context + " must be an array");
        for (const auto& n : p["properties"])
            raw.nested.push_back(parse_native_param(n, tool, warnings));
    }
    warn_unknown_fields(p, {"name", "type", "required", "default", "description", "properties"},
                        context, warnings);
    return raw;
}

// Toolace-style: parameters = {"type": "dict", "properties": {name: {type, default?, ...}},
// "required": [names]}.
std::vector<RawParameter> parse_toolace_params(const Json& params, const std::string& tool,
                                               std::vector<std::string>& warnings) {
    if (!params.is_object() || !params.contains("properties") || !params["properties"].is_object())
        throw Error("MalformedSchemaDocument", "tool '" + tool + "' lacks a properties object");
    std::set<std::string> required;
    if (params.contains("required")) {
        if (!params["required"].is_array())
            throw Error("MalformedSchemaDocument", "non-array required list in tool '" + tool + "'");
        for (const auto& r : params["required"]) {
            if (!r.is_string())
                throw Error("MalformedSchemaDocument", "non-string entry in required list of '" + tool + "'");
            required.insert(r.get<std::string>());
        }
    }
    std::vector<RawParameter> out;
    for (auto it = params["properties"].begin(); it != params["properties"].end(); ++it) {
        const Json& rec = it.value();
        if (!rec.is_object())
            throw Error("MalformedSchemaDocument",
                        "parameter '" + it.key() + "' of '" + tool + "' is not an object");
        RawParameter raw;
        raw.name = it.key();
        const std::string context = "parameter '" + raw.name + "' of tool '" + tool + "'";
        if (!rec.contains("type"))
            throw Error("MalformedSchemaDocument", "missing type for " + context);
        raw.dtype = require_dtype(rec["type"], context);
        if (rec.contains("default")) raw.default_value = rec["default"];
        if (rec.contains("description") && rec["description"].is_string())
            raw.description = rec["description"].get<std::string>();
        raw.in_required_list = required.count(raw.name) > 0;
        warn_unknown_fields(rec, {"type", "default", "description"}, context, warnings);
        out.push_back(std::move(raw));
    }
    return out;
}

// Xlam-style: parameters = {name: {type, description?, default?}}; no required field.
std::vector<RawParameter> parse_xlam_params(const Json& params, const std::string& tool,
                                            std::vector<std::string>& warnings) {
    if (!params.is_object())
        throw Error("MalformedSchemaDocument", "parameters of tool '" + tool + "' must be an object");
    std::vector<RawParameter> out;
    for (auto it = params.begin(); it != params.end(); ++it) {
        const Json& rec = it.value();
        if (!rec.is_object())
            throw Error("MalformedSchemaDocument",
                        "parameter '" + it.key() + "' of '" + tool + "' is not an object");
        RawParameter raw;
        raw.name = it.key();
        const std::string context = "parameter '" + raw.name + "' of tool '" + tool + "'";
        if (!rec.contains("type"))
            throw Error("MalformedSchemaDocument", "missing type for " + context);
        raw.dtype = require_dtype(rec["type"], context);
        if (rec.contains("default")) raw.default_value = rec["default"];
        if (rec.contains("description") && rec["description"].is_string())
            raw.description = rec["description"].get<std::string>();
        warn_unknown_fields(rec, {"type", "default", "description"}, context, warnings);
        out.push_back(std::move(raw));
    }
    return out;
}

void check_distinct_names(const std::vector<ParameterSpec>& params, const std::string& tool) {
    std::set<std::string> seen;
    for (const auto& p : params) {
        if (!seen.insert(p.name).second)
            throw Error("MalformedSchemaDocument",
                        "duplicate parameter '" + p.name + "' in tool '" + tool + "'");
        check_distinct_names(p.nested, tool);
    }
}

Json param_to_json(const ParameterSpec& p) {
    Json rec;
    rec["name"] = p.name;
    rec["type"] = dtype_name(p.dtype);
    rec["required"] = p.required;
    if (p.default_value) rec["default"] = *p.default_value;
    if (!p.description.empty()) rec["description"] = p.description;
    if (!p.nested.empty()) {
        Json nested = Json::array();
        for (const auto& n : p.nested) nested.push_back(param_to_json(n));
        rec["properties"] = nested;
    }
    return rec;
}

} // namespace

ToolRegistry load_registry(const std::string& source, SchemaDialect dialect) {
    Json doc;
    try {
        doc = Json::parse(source);
    } catch (const Json::parse_error& e) {
        throw Error("MalformedSchemaDocument", e.what());
    }
    if (!doc.is_array())
        throw Error("MalformedSchemaDocument", "top-level value must be an array of tool records");

    ToolRegistry registry;
    for (const auto& rec : doc) {
        if (!rec.is_object() || !rec.contains("name") || !rec["name"].is_string())
            throw Error("MalformedSchemaDocument", "tool record without a name");
        FunctionSchema schema;
        schema.name = rec["name"].get<std::string>();
        if (schema.name.empty())
            throw Error("MalformedSchemaDocument", "empty tool name");
        if (rec.contains("description") && rec["description"].is_string())
            schema.description = rec["description"].get<std::string>();

        std::vector<RawParameter> raw;
        if (rec.contains("parameters")) {
            switch (dialect) {
                case SchemaDialect::Native: {
                    if (!rec["parameters"].is_array())
                        throw Error("MalformedSchemaDocument",
                                    "parameters of '" + schema.name + "' must be an array");
                    for (const auto& p : rec["parameters"])
                        raw.push_back(parse_native_param(p, schema.name, registry.warnings_));
                    break;
                }
                case SchemaDialect::Toolace:
                    raw = parse_toolace_params(rec["parameters"], schema.name, registry.warnings_);
                    break;
                case SchemaDialect::Xlam:
                    raw = parse_xlam_params(rec["parameters"], schema.name, registry.warnings_);
                    break;
            }
        }
        for (const auto& r : raw)
            schema.parameters.push_back(derive_required_partition(r, dialect));
        check_distinct_names(schema.parameters, schema.name);

        if (rec.contains("returns")) {
            const Json& ret = rec["returns"];
            if (!ret.is_object() || !ret.contains("type"))
                throw Error("MalformedSchemaDocument",
                            "returns of '" + schema.name + "' must be an object with a type");
            schema.returns_dtype = require_dtype(ret["type"], "returns of '" + schema.name + "'");
        }
        warn_unknown_fields(rec, {"name", "description", "parameters", "required", "returns"},
                            "tool '" + schema.name + "'", registry.warnings_);

        if (!registry.schemas_.emplace(schema.name, std::move(schema)).second)
            throw Error("DuplicateToolName", rec["name"].get<std::string>());
    }
    return registry;
}

Json ToolRegistry::to_json() const {
    Json doc = Json::array();
    for (const auto& [name, schema] : schemas_) {
        Json rec;
        rec["name"] = name;
        if (!schema.description.empty()) rec["description"] = schema.description;
        Json params = Json::array();
        for (const auto& p : schema.parameters) params.push_back(param_to_json(p));
        rec["parameters"] = params;
        if (schema.returns_dtype) rec["returns"] = Json{{"type", dtype_name(*schema.returns_dtype)}};
        doc.push_back(rec);
    }
    return doc;
}

} // namespace tier
