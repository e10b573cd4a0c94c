#include <CLI11.hpp>

#include "tier/bench.hpp"
#include "tier/call_ir.hpp"
#include "tier/executor.hpp"
#include "tier/reward.hpp"
#include "tier/rl_math.hpp"
#include "tier/schema.hpp"
#include "tier/verifier.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

namespace {

using tier::Json;

constexpr int kExitOk = 0;
constexpr int kExitDomainError = 1;
constexpr int kExitUsageError = 2;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot open file: " + path);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

// `-` or empty selects stdin
std::string read_input(const std::string& path) {
    if (path.empty() || path == "-") {
        std::ostringstream out;
        out << std::cin.rdbuf();
        return out.str();
    }
    return read_file(path);
}

void emit(const Json& doc) { std::cout << doc.dump(2) << "\n"; }

tier::ToolRegistry load_registry_file(const std::string& path, const std::string& dialect) {
    tier::SchemaDialect d = tier::SchemaDialect::Native;
    if (dialect == "toolace") d = tier::SchemaDialect::Toolace;
    else if (dialect == "xlam") d = tier::SchemaDialect::Xlam;
    else if (dialect != "native") throw UsageError("unknown dialect: " + dialect);
    tier::ToolRegistry reg = tier::load_registry(read_file(path), d);
    for (const auto& w : reg.warnings()) std::cerr << "warning: " << w << "\n";
    return reg;
}

// --config flag wins over the TIER_CONFIG environment variable; with
// neither, the defaults apply.
tier::RewardConfig resolve_config(const std::string& flag_path) {
    std::string path = flag_path;
    if (path.empty()) {
        if (const char* env = std::getenv("TIER_CONFIG")) path = env;
    }
    if (path.empty()) return tier::RewardConfig{};
    return tier::RewardConfig::from_json(Json::parse(read_file(path)));
}

std::unique_ptr<tier::ToolBackend> make_backend(const std::string& kind,
                                                const std::string& fixtures_path,
                                                const tier::ToolRegistry& registry) {
    if (kind == "echo") return tier::make_echo_backend(registry);
    if (kind == "fixtures") {
        if (fixtures_path.empty())
            throw UsageError("--backend fixtures requires --fixtures <path>");
        return tier::make_fixture_backend(Json::parse(read_file(fixtures_path)));
    }
    throw UsageError("unknown backend: " + kind);
}

Json format_error_doc(const tier::FormatError& err) {
    Json doc{{"error", "FormatError"}, {"reason", err.code}, {"message", err.message}};
    if (err.span) doc["span"] = Json{{"offset", err.span->first}, {"length", err.span->second}};
    return doc;
}

// Payload text may arrive bare or wrapped in the full response format; a
// <tool_call> tag (outside think blocks) selects the wrapped path.
tier::ParseOutcome parse_payload_or_response(const std::string& text, const std::string& format) {
    auto parse_with = [&](const std::string& payload, tier::ReturnMode mode) {
        if (format == "json") return tier::parse_json_ast(payload, mode);
        if (format == "xml") return tier::parse_xml_ast(payload, mode);
        if (format == "direct") return tier::parse_direct_list(payload, mode);
        if (format == "auto") return tier::parse_auto(payload, mode);
        throw UsageError("unknown format: " + format);
    };
    auto extracted = tier::extract_tool_call_block(text);
    if (std::holds_alternative<tier::ExtractedBlock>(extracted)) {
        const auto& block = std::get<tier::ExtractedBlock>(extracted);
        return parse_with(block.payload, block.return_mode);
    }
    const auto& err = std::get<tier::FormatError>(extracted);
    if (err.code != "MissingToolCallBlock")
        return tier::ParseOutcome::failure(err); // a broken wrapper is a format failure
    return parse_with(text, tier::ReturnMode::One);
}

int cmd_parse(const std::string& format, const std::string& input_path) {
    tier::ParseOutcome outcome = parse_payload_or_response(read_input(input_path), format);
    if (!outcome.ok()) {
        emit(format_error_doc(outcome.error()));
        return kExitDomainError;
    }
    emit(tier::sequence_to_json(outcome.sequence()));
    return kExitOk;
}

int cmd_verify(const std::string& registry_path, const std::string& dialect,
               const std::string& input_path) {
    tier::ToolRegistry registry = load_registry_file(registry_path, dialect);
    tier::ParseOutcome outcome = parse_payload_or_response(read_input(input_path), "auto");
    if (!outcome.ok()) {
        emit(format_error_doc(outcome.error()));
        return kExitDomainError;
    }
    emit(tier::verify_sequence(outcome.sequence(), registry).to_json());
    return kExitOk; // mismatch counts are data, not failures
}

int cmd_exec(const std::string& registry_path, const std::string& dialect,
             const std::string& backend_kind, const std::string& fixtures_path,
             const std::string& input_path) {
    tier::ToolRegistry registry = load_registry_file(registry_path, dialect);
    auto backend = make_backend(backend_kind, fixtures_path, registry);
    tier::ParseOutcome outcome = parse_payload_or_response(read_input(input_path), "auto");
    if (!outcome.ok()) {
        emit(format_error_doc(outcome.error()));
        return kExitDomainError;
    }
    tier::ExecutionTrace trace = tier::execute_sequence(outcome.sequence(), *backend);
    emit(trace.to_json());
    return trace.all_succeeded ? kExitOk : kExitDomainError;
}

int cmd_reward(const std::string& registry_path, const std::string& dialect,
               const std::string& backend_kind, const std::string& fixtures_path,
               const std::string& gold_path, const std::string& config_path,
               const std::string& response_path, const std::string& mode) {
    if (mode != "tier" && mode != "simple") throw UsageError("unknown mode: " + mode);
    tier::ToolRegistry registry = load_registry_file(registry_path, dialect);
    auto backend = make_backend(backend_kind, fixtures_path, registry);
    tier::GoldSpec gold = tier::GoldSpec::from_json(Json::parse(read_file(gold_path)));
    tier::RewardConfig config = resolve_config(config_path);
    tier::PipelineResult result = tier::score_response(read_input(response_path), registry,
                                                       *backend, gold, config, mode == "simple");
    Json doc = result.breakdown.to_json();
    if (result.format_error) doc["format_error"] = format_error_doc(*result.format_error);
    emit(doc);
    return kExitOk; // a zero reward is a valid result
}

int cmd_evaluate(const std::string& dataset_path, const std::string& rollouts_path,
                 const std::string& registry_path, const std::string& dialect,
                 const std::string& fixtures_path, const std::string& config_path) {
    tier::ToolRegistry registry = load_registry_file(registry_path, dialect);
    auto backend = tier::make_fixture_backend(Json::parse(read_file(fixtures_path)));
    tier::RewardConfig config = resolve_config(config_path);
    auto items = tier::load_dataset(read_file(dataset_path), registry);
    auto rollouts = tier::load_rollouts(read_file(rollouts_path));
    tier::EvaluationRun run = tier::evaluate_rollouts(items, rollouts, registry, *backend, config);
    emit(run.report.to_json());
    return kExitOk;
}

int cmd_check_split(const std::string& train_path, const std::string& eval_path,
                    const std::string& registry_path, const std::string& dialect) {
    tier::ToolRegistry registry = load_registry_file(registry_path, dialect);
    auto train = tier::load_dataset(read_file(train_path), registry);
    auto eval = tier::load_dataset(read_file(eval_path), registry);
    auto overlap = tier::split_tool_overlap(train, eval);
    emit(Json{{"disjoint", overlap.empty()}, {"overlap", overlap}});
    return overlap.empty() ? kExitOk : kExitDomainError;
}

int cmd_advantages(const std::string& rewards_path, double epsilon) {
    Json doc = Json::parse(read_input(rewards_path));
    if (!doc.is_object()) throw tier::Error("MalformedRewards", "expected {prompt_id: [rewards]}");
    Json out = Json::object();
    for (auto it = doc.begin(); it != doc.end(); ++it) {
        tier::RolloutGroup group;
        group.prompt_id = it.key();
        for (const auto& r : it.value()) {
            const double reward = r.get<double>();
            if (reward < 0.0 || reward > 1.0)
                throw tier::Error("RewardOutOfRange",
                                  "reward " + std::to_string(reward) + " in group " + it.key());
            group.rewards.push_back(reward);
        }
        out[group.prompt_id] = tier::group_advantages(group, epsilon).to_json();
    }
    emit(out);
    return kExitOk;
}

int cmd_loss(const std::string& input_path, double clip_epsilon, double lambda_kl) {
    Json doc = Json::parse(read_input(input_path));
    if (!doc.is_array())
        throw tier::Error("MalformedBatch", "expected an array of trajectory records");
    std::vector<std::pair<tier::TokenLogProbs, double>> batch;
    auto read_row = [](const Json& rec, const char* key, std::vector<double>& out) {
        for (const auto& v : rec.at(key)) {
            const double x = v.get<double>();
            if (!std::isfinite(x) || x > 0.0)
                throw tier::Error("BadLogProb",
                                  std::string(key) + " entries must be finite and <= 0");
            out.push_back(x);
        }
    };
    for (const auto& rec : doc) {
        tier::TokenLogProbs lp;
        read_row(rec, "current", lp.current);
        read_row(rec, "old", lp.old);
        read_row(rec, "reference", lp.reference);
        batch.emplace_back(std::move(lp), rec.at("advantage").get<double>());
    }
    emit(tier::total_loss(batch, clip_epsilon, lambda_kl).to_json());
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Deterministic scoring pipeline for tool-call sequences"};
    app.require_subcommand(1);

    std::string format = "auto", input, registry_path, dialect = "native", backend_kind = "echo";
    std::string fixtures_path, gold_path, config_path, response_path, mode = "tier";
    std::string dataset_path, rollouts_path, rewards_path;
    double epsilon = 1e-4, clip_epsilon = 0.2, lambda_kl = 0.04;

    auto* parse = app.add_subcommand("parse", "Parse a payload into the canonical sequence");
    parse->add_option("--format", format, "json|xml|direct|auto")->capture_default_str();
    parse->add_option("--input", input, "payload file, or - for stdin");

    auto* verify = app.add_subcommand("verify", "Check a sequence against function schemas");
    verify->add_option("--registry", registry_path, "schema document")->required();
    verify->add_option("--dialect", dialect, "native|toolace|xlam")->capture_default_str();
    verify->add_option("--input", input, "payload file, or - for stdin");

    auto* exec = app.add_subcommand("exec", "Execute a sequence on a tool backend");
    exec->add_option("--registry", registry_path)->required();
    exec->add_option("--dialect", dialect)->capture_default_str();
    exec->add_option("--backend", backend_kind, "echo|fixtures")->capture_default_str();
    exec->add_option("--fixtures", fixtures_path, "fixture tables (for --backend fixtures)");
    exec->add_option("--input", input);

    auto* reward = app.add_subcommand("reward", "Score one model response end to end");
    reward->add_option("--registry", registry_path)->required();
    reward->add_option("--dialect", dialect)->capture_default_str();
    reward->add_option("--backend", backend_kind)->capture_default_str();
    reward->add_option("--fixtures", fixtures_path);
    reward->add_option("--gold", gold_path, "gold answer document")->required();
    reward->add_option("--config", config_path, "reward config (overrides TIER_CONFIG)");
    reward->add_option("--response", response_path, "model response file, or - for stdin");
    reward->add_option("--mode", mode, "tier|simple")->capture_default_str();

    auto* evaluate = app.add_subcommand("evaluate", "Score a rollout file over a dataset");
    evaluate->add_option("--dataset", dataset_path)->required();
    evaluate->add_option("--rollouts", rollouts_path)->required();
    evaluate->add_option("--registry", registry_path)->required();
    evaluate->add_option("--dialect", dialect)->capture_default_str();
    evaluate->add_option("--fixtures", fixtures_path)->required();
    evaluate->add_option("--config", config_path);

    std::string train_path, eval_path;
    auto* check_split = app.add_subcommand("check-split",
                                           "Verify two dataset splits share no tools in any role");
    check_split->add_option("--train", train_path)->required();
    check_split->add_option("--eval", eval_path)->required();
    check_split->add_option("--registry", registry_path)->required();
    check_split->add_option("--dialect", dialect)->capture_default_str();

    auto* advantages = app.add_subcommand("advantages", "Group-normalized advantages");
    advantages->add_option("--rewards", rewards_path, "{prompt_id: [rewards]} file, or - for stdin");
    advantages->add_option("--epsilon", epsilon)->capture_default_str();

    auto* loss = app.add_subcommand("loss", "Clipped surrogate plus KL penalty");
    loss->add_option("--input", input, "trajectory log-prob batch, or - for stdin");
    loss->add_option("--clip-epsilon", clip_epsilon)->capture_default_str();
    loss->add_option("--lambda-kl", lambda_kl)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        return kExitUsageError;
    }

    try {
        if (parse->parsed()) return cmd_parse(format, input);
        if (verify->parsed()) return cmd_verify(registry_path, dialect, input);
        if (exec->parsed())
            return cmd_exec(registry_path, dialect, backend_kind, fixtures_path, input);
        if (reward->parsed())
            return cmd_reward(registry_path, dialect, backend_kind, fixtures_path, gold_path,
                              config_path, response_path, mode);
        if (evaluate->parsed())
            return cmd_evaluate(dataset_path, rollouts_path, registry_path, dialect, fixtures_path,
                                config_path);
        if (check_split->parsed())
            return cmd_check_split(train_path, eval_path, registry_path, dialect);
        if (advantages->parsed()) return cmd_advantages(rewards_path, epsilon);
        if (loss->parsed()) return cmd_loss(input, clip_epsilon, lambda_kl);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsageError;
    } catch (const tier::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDomainError;
    } catch (const Json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDomainError;
    }
    return kExitUsageError;
}
