#pragma once

#include "tier/common.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace tier {

enum class Dtype { String, Integer, Float, Boolean, Object, Array, Any };

std::optional<Dtype> parse_dtype(const std::string& name);
std::string dtype_name(Dtype t);

/// Schema document flavours. Native carries an explicit per-parameter
/// required flag; the other two are adapters for corpora that encode the
/// required/optional partition differently (required-name list vs.
/// default-presence).
enum class SchemaDialect { Native, Toolace, Xlam };

struct ParameterSpec {
    std::string name;
    Dtype dtype = Dtype::Any;
    bool required = false;
    std::optional<Json> default_value; // absent whenever required is true
    std::string description;
    std::vector<ParameterSpec> nested; // for object-typed params, may be empty

    const ParameterSpec* find_nested(const std::string& pname) const;
};

struct FunctionSchema {
    std::string name;
    std::vector<ParameterSpec> parameters;
    std::optional<Dtype> returns_dtype;
    std::string description;

    const ParameterSpec* find_param(const std::string& pname) const;
};

/// Raw parameter record as it appears in a schema document, before the
/// dialect rules decide the required/optional partition.
struct RawParameter {
    std::string name;
    Dtype dtype = Dtype::Any;
    std::optional<Json> default_value;
    std::optional<bool> required_flag; // native dialect only
    bool in_required_list = false;     // toolace dialect only
    std::string description;
    std::vector<RawParameter> nested;
};

/// Applies the dialect-specific partition rule to one raw record:
///  - native:  the explicit flag, verbatim; flag + default is an error
///  - toolace: required iff listed in `required`, which takes precedence
///             over a declared default (the default is then dropped)
///  - xlam:    optional iff a default is declared
ParameterSpec derive_required_partition(const RawParameter& raw, SchemaDialect dialect);

/// Immutable set of function schemas keyed by tool name.
class ToolRegistry {
public:
    /// Lookup is total: an unknown name yields nullptr, never an error
    /// (name validity is scored downstream, not here).
    const FunctionSchema* lookup(const std::string& name) const;

    bool empty() const { return schemas_.empty(); }
    std::size_t size() const { return schemas_.size(); }
    std::vector<std::string> names() const;

    const std::map<std::string, FunctionSchema>& schemas() const { return schemas_; }
    const std::vector<std::string>& warnings() const { return warnings_; }

    /// Serializes back to a native-dialect document. Reloading the result
    /// reproduces the registry field-by-field.
    Json to_json() const;

    friend ToolRegistry load_registry(const std::string& source, SchemaDialect dialect);

private:
    std::map<std::string, FunctionSchema> schemas_;
    std::vector<std::string> warnings_;
};

/// Parses a schema document (see docs/formats.md) into a registry.
/// Errors: MalformedSchemaDocument, DuplicateToolName, UnknownDtype,
/// ConflictingDeclaration.
ToolRegistry load_registry(const std::string& source, SchemaDialect dialect);

} // namespace tier
