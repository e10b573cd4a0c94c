#include "tier/bench.hpp"

#include <algorithm>
#include <cctype>
#include <random>
#include <set>
#include <sstream>

namespace tier {

std::optional<Structure> parse_structure(const std::string& name) {
    if (name == "none") return Structure::None;
    if (name == "single") return Structure::Single;
    if (name == "chain") return Structure::Chain;
    if (name == "funnel") return Structure::Funnel;
    if (name == "tree") return Structure::Tree;
    if (name == "conjunctive") return Structure::Conjunctive;
    if (name == "mixed") return Structure::Mixed;
    return std::nullopt;
}

std::string structure_name(Structure s) {
    switch (s) {
        case Structure::None: return "none";
        case Structure::Single: return "single";
        case Structure::Chain: return "chain";
        case Structure::Funnel: return "funnel";
        case Structure::Tree: return "tree";
        case Structure::Conjunctive: return "conjunctive";
        case Structure::Mixed: return "mixed";
    }
    return "none";
}

namespace {

std::vector<std::string> split_lines(const std::string& source) {
    std::vector<std::string> lines;
    std::istringstream in(source);
    std::string line;
    while (std::getline(in, line)) {
        // tolerate CRLF and blank lines
        if (!line.empty() && line.back() == '\r') line.pop_back();
        bool blank = true;
        for (char c : line)
            if (!std::isspace(static_cast<unsigned char>(c))) blank = false;
        if (!blank) lines.push_back(line);
    }
    return lines;
}

} // namespace

std::vector<BenchItem> load_dataset(const std::string& source, const ToolRegistry& registry) {
    std::vector<BenchItem> items;
    std::set<std::string> seen_ids;
    for (const std::string& line : split_lines(source)) {
        Json rec;
        try {
            rec = Json::parse(line);
        } catch (const Json::parse_error& e) {
            throw Error("MalformedDataset", e.what());
        }
        if (!rec.is_object() || !rec.contains("id") || !rec.contains("query") ||
            !rec.contains("depth") || !rec.contains("structure") || !rec.contains("gold"))
            throw Error("MalformedDataset", "item record lacks a required field");

        BenchItem item;
        item.id = rec["id"].get<std::string>();
        if (!seen_ids.insert(item.id).second)
            throw Error("MalformedDataset", "duplicate item id '" + item.id + "'");
        item.query = rec["query"].get<std::string>();
        item.depth = rec["depth"].get<int>();
        if (item.depth < 0 || item.depth > 6)
            throw Error("MalformedDataset", "depth of '" + item.id + "' outside 0..6");
        auto structure = parse_structure(rec["structure"].get<std::string>());
        if (!structure)
            throw Error("MalformedDataset", "unknown structure tag on '" + item.id + "'");
        item.structure = *structure;
        if (item.depth >= 2 && item.structure == Structure::Single)
            throw Error("MalformedDataset",
                        "'" + item.id + "': a single call cannot have depth >= 2");

        if (rec.contains("tools"))
            for (const auto& t : rec["tools"]) item.tool_names.push_back(t.get<std::string>());
        for (const auto& name : item.tool_names)
            if (!registry.lookup(name))
                throw Error("UnknownToolReference", "'" + item.id + "' references '" + name + "'");

        item.gold = GoldSpec::from_json(rec["gold"]);
        if ((item.depth == 0) != item.gold.no_call)
            throw Error("DepthGoldConflict",
                        "'" + item.id + "': depth 0 and a no-call gold must coincide");

        if (rec.contains("gold_trajectory")) {
            const Json& traj = rec["gold_trajectory"];
            item.gold_trajectory = traj.is_string() ? traj.get<std::string>() : traj.dump();
        }
        if (rec.contains("return_mode")) {
            const std::string mode = rec["return_mode"].get<std::string>();
            if (mode == "all") item.return_mode = ReturnMode::All;
            else if (mode == "one") item.return_mode = ReturnMode::One;
            else throw Error("MalformedDataset", "bad return_mode on '" + item.id + "'");
        }
        items.push_back(std::move(item));
    }
    return items;
}

ItemEvaluation evaluate_item(const BenchItem& item, const std::string& model_response,
                             const ToolRegistry& registry, const ToolBackend& backend,
                             const RewardConfig& config) {
    PipelineResult result = score_response(model_response, registry, backend, item.gold, config);
    ItemEvaluation eval;
    eval.breakdown = result.breakdown;
    eval.correct = result.breakdown.r_answer > 0.0;
    return eval;
}

DepthReport aggregate_by_depth(const std::vector<std::pair<int, bool>>& results) {
    if (results.empty()) throw Error("EmptyResults", "nothing to aggregate");
    DepthReport report;
    int total = 0, correct = 0;
    for (const auto& [depth, ok] : results) {
        DepthBucket& bucket = report.per_depth[depth];
        bucket.n += 1;
        bucket.correct += ok ? 1 : 0;
        total += 1;
        correct += ok ? 1 : 0;
    }
    for (auto& [_, bucket] : report.per_depth)
        bucket.accuracy = static_cast<double>(bucket.correct) / static_cast<double>(bucket.n);
    report.overall = static_cast<double>(correct) / static_cast<double>(total);
    return report;
}

std::vector<std::string> sample_distractors(const ToolRegistry& registry,
                                            const std::vector<std::string>& targets, std::size_t k,
                                            std::uint64_t seed) {
    std::set<std::string> target_set(targets.begin(), targets.end());
    std::set<Dtype> target_returns;
    for (const auto& t : targets) {
        const FunctionSchema* schema = registry.lookup(t);
        if (schema && schema->returns_dtype) target_returns.insert(*schema->returns_dtype);
    }

    std::vector<std::string> preferred, rest;
    for (const auto& name : registry.names()) {
        if (target_set.count(name)) continue;
        const FunctionSchema* schema = registry.lookup(name);
        const bool matches =
            schema->returns_dtype && target_returns.count(*schema->returns_dtype) > 0;
        (matches ? preferred : rest).push_back(name);
    }
    if (preferred.size() + rest.size() < k)
        throw Error("InsufficientPool", "registry has too few non-target tools");

    // Fisher-Yates with the raw engine output keeps the draw identical
    // across platforms (std::shuffle is implementation-defined).
    std::mt19937_64 rng(seed);
    auto shuffle = [&rng](std::vector<std::string>& v) {
        for (std::size_t i = v.size(); i > 1; --i)
            std::swap(v[i - 1], v[rng() % i]);
    };
    shuffle(preferred);
    shuffle(rest);

    std::vector<std::string> out;
    for (const auto& name : preferred) {
        if (out.size() == k) break;
        out.push_back(name);
    }
    for (const auto& name : rest) {
        if (out.size() == k) break;
        out.push_back(name);
    }
    return out;
}

std::vector<std::string> split_tool_overlap(const std::vector<BenchItem>& train_split,
                                            const std::vector<BenchItem>& eval_split) {
    std::set<std::string> train_tools;
    for (const auto& item : train_split)
        train_tools.insert(item.tool_names.begin(), item.tool_names.end());
    std::set<std::string> overlap;
    for (const auto& item : eval_split)
        for (const auto& name : item.tool_names)
            if (train_tools.count(name)) overlap.insert(name);
    return {overlap.begin(), overlap.end()};
}

std::map<std::string, std::string> load_rollouts(const std::string& source) {
    std::map<std::string, std::string> rollouts;
    for (const std::string& line : split_lines(source)) {
        Json rec;
        try {
            rec = Json::parse(line);
        } catch (const Json::parse_error& e) {
            throw Error("MalformedRollouts", e.what());
        }
        if (!rec.is_object() || !rec.contains("item_id") || !rec.contains("response"))
            throw Error("MalformedRollouts", "rollout record needs item_id and response");
        const std::string id = rec["item_id"].get<std::string>();
        if (!rollouts.emplace(id, rec["response"].get<std::string>()).second)
            throw Error("DuplicateRollout", "two rollouts for item '" + id + "'");
    }
    return rollouts;
}

EvaluationRun evaluate_rollouts(const std::vector<BenchItem>& items,
                                const std::map<std::string, std::string>& rollouts,
                                const ToolRegistry& registry, const ToolBackend& backend,
                                const RewardConfig& config) {
    std::vector<std::string> orphans;
    std::set<std::string> item_ids;
    for (const auto& item : items) {
        item_ids.insert(item.id);
        if (!rollouts.count(item.id)) orphans.push_back("missing rollout for " + item.id);
    }
    for (const auto& [id, _] : rollouts)
        if (!item_ids.count(id)) orphans.push_back("rollout for unknown item " + id);
    if (!orphans.empty()) {
        std::string msg;
        for (const auto& o : orphans) msg += (msg.empty() ? "" : "; ") + o;
        throw Error("OrphanedRollouts", msg);
    }

    EvaluationRun run;
    std::vector<std::pair<int, bool>> results;
    for (const auto& item : items) {
        ItemEvaluation eval = evaluate_item(item, rollouts.at(item.id), registry, backend, config);
        results.emplace_back(item.depth, eval.correct);
        run.per_item.emplace_back(item.id, std::move(eval));
    }
    run.report = aggregate_by_depth(results);
    return run;
}

Json DepthReport::to_json() const {
    Json doc;
    doc["overall"] = overall;
    Json depths = Json::object();
    for (const auto& [depth, bucket] : per_depth)
        depths[std::to_string(depth)] = Json{
            {"n", bucket.n}, {"correct", bucket.correct}, {"accuracy", bucket.accuracy}};
    doc["per_depth"] = depths;
    return doc;
}

} // namespace tier
