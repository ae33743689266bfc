#include "secda_dse/explorer.hpp"

#include <algorithm>
#include <cstdio>

namespace secda_dse {

namespace {

MetricsSummary unevaluated_metrics() {
    return MetricsSummary{};  // all zero, feasible = false
}

bool entry_less(const EvaluatedEntry& a, const EvaluatedEntry& b) {
    if (a.objective != b.objective) return a.objective < b.objective;
    return a.point < b.point;
}

Json entry_json(const EvaluatedEntry& e) {
    return Json{{"point", to_json(e.point)},   {"design_id", e.design_id}, {"run_id", e.run_id},
                {"point_id", e.point_id},      {"objective", number_or_null(e.objective)},
                {"feasible", e.feasible}};
}

Json best_json(const std::optional<EvaluatedEntry>& best) {
    return best ? entry_json(*best) : Json(nullptr);
}

}  // namespace

std::string to_string(Strategy strategy) {
    switch (strategy) {
        case Strategy::exhaustive: return "exhaustive";
        case Strategy::heuristic: return "heuristic";
        case Strategy::llm: return "llm";
    }
    return "unknown";
}

Strategy strategy_from_string(const std::string& text) {
    if (text == "exhaustive") return Strategy::exhaustive;
    if (text == "heuristic") return Strategy::heuristic;
    if (text == "llm") return Strategy::llm;
    throw ValidationError("strategy", "unknown strategy '" + text + "'");
}

ExplorationConfig load_exploration_config(const Json& document) {
    FieldReader reader(document, "exploration");
    ExplorationConfig config{load_workload(reader.raw("workload")), load_device(reader.raw("device")),
                             load_directives(reader.raw("directives"))};
    config.strategy = strategy_from_string(reader.optional_or<std::string>("strategy", "heuristic"));
    config.max_iterations = reader.optional_or<std::size_t>("max_iterations", config.max_iterations);
    config.candidates_per_iteration =
        reader.optional_or<std::size_t>("candidates_per_iteration", config.candidates_per_iteration);
    config.diversity_k = reader.optional_or<std::size_t>("diversity_k", config.diversity_k);
    config.seed = reader.optional_or<std::uint64_t>("seed", config.seed);
    config.objective = reader.optional_or<std::string>("objective", config.objective);
    config.workspace = reader.optional_or<std::string>("workspace", "");
    if (const Json* profile = reader.raw_optional("profile"); profile && !profile->is_null()) {
        config.profile = load_profile(*profile);
    }
    if (const Json* advisor = reader.raw_optional("advisor"); advisor && !advisor->is_null()) {
        config.advisor = load_advisor_config(*advisor);
    }
    config.external_evaluator = reader.optional<std::string>("external_evaluator");
    if (auto corpus = reader.optional<std::string>("corpus_dir")) config.corpus_dir = *corpus;
    const auto timestamps = reader.optional_or<std::string>("timestamps", "logical");
    reader.finish();

    if (timestamps != "logical" && timestamps != "wall") {
        throw ValidationError("timestamps", "timestamps must be 'logical' or 'wall'");
    }
    config.logical_timestamps = timestamps == "logical";
    if (config.max_iterations < 1) throw ValidationError("max_iterations", "max_iterations must be >= 1");
    if (config.candidates_per_iteration < 1) {
        throw ValidationError("candidates_per_iteration", "candidates_per_iteration must be >= 1");
    }
    if (config.objective != "min_total_cycles") {
        throw ValidationError("objective", "only min_total_cycles is supported");
    }
    return config;
}

Json to_json(const ExplorationConfig& config) {
    Json out{{"workload", to_json(config.workload)},
             {"device", to_json(config.device)},
             {"directives", to_json(config.directives)},
             {"strategy", to_string(config.strategy)},
             {"max_iterations", config.max_iterations},
             {"candidates_per_iteration", config.candidates_per_iteration},
             {"diversity_k", config.diversity_k},
             {"seed", config.seed},
             {"objective", config.objective},
             {"profile", to_json(config.profile)},
             {"advisor", to_json(config.advisor)},
             {"timestamps", config.logical_timestamps ? "logical" : "wall"}};
    if (config.external_evaluator) out["external_evaluator"] = *config.external_evaluator;
    if (config.corpus_dir) out["corpus_dir"] = config.corpus_dir->string();
    return out;
}

Json to_json(const ExplorationState& state) {
    Json frontier = Json::array();
    for (const auto& e : state.frontier) frontier.push_back(entry_json(e));
    Json diversity = Json::array();
    for (const auto& p : state.diversity_set) diversity.push_back(to_json(p));
    return Json{{"iteration", state.iteration},
                {"evaluated_count", state.evaluated.size()},
                {"frontier", frontier},
                {"best", best_json(state.best)},
                {"diversity_set", diversity},
                {"pending_verdicts", state.pending_verdicts}};
}

double directive_distance(const ParameterPoint& a, const ParameterPoint& b, const Directives& directives) {
    const auto ia = index_of(a, directives);
    const auto ib = index_of(b, directives);
    auto term = [](std::size_t x, std::size_t y, std::size_t size) {
        const auto diff = x > y ? x - y : y - x;
        return static_cast<double>(diff) / static_cast<double>(size);
    };
    return term(ia.buffer_depth, ib.buffer_depth, directives.buffer_depth().size()) +
           term(ia.parallelism_p, ib.parallelism_p, directives.parallelism_p().size()) +
           term(ia.data_width, ib.data_width, directives.data_width().size());
}

std::vector<ParameterPoint> select_frontier(const ExplorationState& state, const ExplorationConfig& config) {
    std::vector<ParameterPoint> selected;
    for (const auto& e : state.frontier) {
        if (selected.size() >= config.candidates_per_iteration) break;
        selected.push_back(e.point);
    }

    std::vector<ParameterPoint> pool;
    for (const auto& e : state.history) {
        if (state.vetoed.count(e.design_id)) continue;
        if (std::find(selected.begin(), selected.end(), e.point) != selected.end()) continue;
        if (std::find(pool.begin(), pool.end(), e.point) != pool.end()) continue;
        pool.push_back(e.point);
    }
    std::sort(pool.begin(), pool.end());

    for (std::size_t added = 0; added < config.diversity_k && !pool.empty(); ++added) {
        std::size_t best_index = 0;
        double best_distance = -1.0;
        for (std::size_t i = 0; i < pool.size(); ++i) {
            double nearest = std::numeric_limits<double>::infinity();
            for (const auto& s : selected) nearest = std::min(nearest, directive_distance(pool[i], s, config.directives));
            // pool is sorted, so strict > keeps the lexicographically smaller point on ties
            if (nearest > best_distance) {
                best_distance = nearest;
                best_index = i;
            }
        }
        selected.push_back(pool[best_index]);
        pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(best_index));
    }
    return selected;
}

std::string record_human_verdict(CostDb& db, const HardwareDataPoint& original, Verdict verdict,
                                 const std::string& notes, const std::string& created_at) {
    HardwareDataPoint record = original;
    record.point_id = make_point_id(original.design_id, DataSource::human, db.next_sequence());
    record.source = DataSource::human;
    record.verdict = verdict;
    record.rationale = notes;
    record.created_at = created_at;
    return db.append(record);
}

void init_workspace(const std::filesystem::path& workspace) {
    std::error_code ec;
    std::filesystem::create_directories(workspace / "db", ec);
    std::filesystem::create_directories(workspace / "runs", ec);
    if (ec) throw StorageError("cannot create workspace " + workspace.string() + ": " + ec.message());
    const auto db = workspace / "db" / "datapoints.ndjson";
    if (!std::filesystem::exists(db)) write_text_file(db, "");
}

Explorer::Explorer(ExplorationConfig config, CostDb& db, std::shared_ptr<ChatProvider> provider)
    : config_(std::move(config)), db_(db), provider_(std::move(provider)) {
    auto tmpl = find_template(to_string(config_.workload.kernel_kind));
    if (!tmpl) throw UnsupportedTemplate("no template for kernel " + to_string(config_.workload.kernel_kind));
    template_ = *tmpl;
    if (config_.external_evaluator) external_.emplace(*config_.external_evaluator);
    if (config_.strategy == Strategy::llm) {
        if (!provider_) provider_ = std::make_shared<HttpChatProvider>();
        if (config_.corpus_dir) index_ = load_or_build_index(*config_.corpus_dir, config_.workspace / "index.json");
    }
}

std::string Explorer::timestamp(std::size_t sequence) const {
    return config_.logical_timestamps ? logical_timestamp(sequence) : wall_timestamp();
}

bool Explorer::has_point(const std::string& point_id) const {
    return owned_points_.count(point_id) > 0;
}

bool Explorer::any_unexplored() const {
    for (const auto& p : enumerate_points(config_.directives)) {
        if (!evaluated_points_.count(p) && validate_point(p, config_.workload, config_.directives).valid) return true;
    }
    return false;
}

ExplorationSnapshot Explorer::snapshot() const {
    ExplorationSnapshot snap{config_.workload, config_.device, config_.directives};
    PointFilter filter;
    filter.workload = config_.workload;
    filter.device = config_.device.name;
    auto points = db_.query(filter);
    if (points.size() > config_.advisor.max_data_points) {
        points.erase(points.begin(), points.end() - static_cast<std::ptrdiff_t>(config_.advisor.max_data_points));
    }
    snap.recent_points = std::move(points);
    snap.evaluated = evaluated_points_;
    for (const auto& e : state_.history) {
        if (state_.vetoed.count(e.design_id)) snap.excluded.insert(e.point);
    }
    snap.centers = select_frontier(state_, config_);
    if (state_.best) snap.best = state_.best->point;
    snap.max_candidates = config_.candidates_per_iteration;
    snap.iteration = state_.iteration;
    return snap;
}

void Explorer::record_rejection(const ParameterPoint& point, const std::string& rationale) {
    HardwareDataPoint record;
    record.design_id = compute_design_id(template_.template_id, point, config_.workload);
    const auto sequence = db_.next_sequence();
    record.point_id = make_point_id(record.design_id, DataSource::analytical, sequence);
    record.configuration = point;
    record.workload = config_.workload;
    record.device = config_.device.name;
    record.metrics = unevaluated_metrics();
    record.verdict = Verdict::rejected;
    record.source = DataSource::analytical;
    record.rationale = rationale;
    record.created_at = timestamp(sequence);
    db_.append(record);
    owned_points_.insert(record.point_id);
}

std::vector<Explorer::Pick> Explorer::obtain_candidates(std::optional<Transcript>& transcript, std::size_t& rejected) {
    std::vector<Pick> picks;
    const auto limit = config_.candidates_per_iteration;

    if (config_.strategy == Strategy::exhaustive) {
        for (const auto& p : enumerate_points(config_.directives)) {
            if (picks.size() >= limit) break;
            if (evaluated_points_.count(p)) continue;
            if (!validate_point(p, config_.workload, config_.directives).valid) continue;
            picks.push_back({p, std::nullopt});
        }
        if (picks.empty()) throw SpaceExhausted("every valid point in the directive space has been evaluated");
        return picks;
    }

    if (!any_unexplored()) throw SpaceExhausted("every valid point in the directive space has been evaluated");
    const auto snap = snapshot();

    std::optional<Proposal> proposal;
    if (config_.strategy == Strategy::heuristic) {
        proposal = heuristic_advise(snap, config_.seed);
    } else {
        AdvisorConfig remote = config_.advisor;
        remote.provider = ProviderKind::remote_chat;
        try {
            auto advice = advise(snap, remote, provider_.get(), index_ ? &*index_ : nullptr);
            transcript = advice.transcript;
            for (const auto& r : advice.rejected_points) {
                std::string why = "out of bounds:";
                for (const auto& reason : r.reasons) why += " " + reason + ";";
                record_rejection(r.point, why);
                ++rejected;
            }
            proposal = std::move(advice.proposal);
        } catch (const ProviderUnreachable& e) {
            fallbacks_.push_back(Json{{"iteration", state_.iteration + 1}, {"reason", e.what()}});
            proposal = heuristic_advise(snap, config_.seed);
        } catch (const ProposalUnparseable& e) {
            fallbacks_.push_back(Json{{"iteration", state_.iteration + 1}, {"reason", e.what()}, {"fallback", "none"}});
        }
    }
    if (!proposal) return picks;

    for (const auto& c : proposal->candidates) {
        if (c.action == CandidateAction::reject) {
            record_rejection(c.point, "advisor rejected: " + proposal->rationale);
            ++rejected;
            continue;
        }
        if (picks.size() >= limit) continue;
        if (evaluated_points_.count(c.point) || snap.excluded.count(c.point)) continue;
        picks.push_back({c.point, proposal->rationale});
    }
    return picks;
}

std::filesystem::path Explorer::reserve_run_folder(const std::string& design_id) {
    char prefix[16];
    std::snprintf(prefix, sizeof(prefix), "%04zu", state_.iteration + 1);
    const std::string base = std::string(prefix) + "-" + design_id.substr(0, 12);
    auto folder = config_.workspace / "runs" / base;
    for (int n = 2; std::filesystem::exists(folder); ++n) {
        folder = config_.workspace / "runs" / (base + "-" + std::to_string(n));
    }
    std::filesystem::create_directories(folder / "src");
    return folder;
}

void Explorer::evaluate_candidate(const Pick& pick, const std::optional<Transcript>& transcript,
                                  std::vector<std::string>& run_ids) {
    const auto& point = pick.point;
    const auto design_id = compute_design_id(template_.template_id, point, config_.workload);
    EvaluatedEntry entry{point, design_id, "", "", kInfeasibleObjective, false};
    HardwareDataPoint record;
    record.design_id = design_id;
    record.configuration = point;
    record.workload = config_.workload;
    record.device = config_.device.name;
    record.source = external_ ? DataSource::external : DataSource::analytical;
    record.rationale = pick.rationale;

    try {
        const auto design = instantiate(template_, point, config_.workload, config_.directives);
        const auto folder = reserve_run_folder(design_id);
        entry.run_id = folder.filename().string();

        write_source_set(emit_source(design), folder / "src");
        write_json_file(folder / "design.json", to_json(design));
        if (transcript) {
            write_text_file(folder / "prompt.txt", transcript->prompt);
            write_text_file(folder / "reply.txt", transcript->reply);
        }

        EvaluationReport report;
        if (external_) {
            report = external_->run(design, folder);
        } else {
            report = evaluate(design, config_.device, config_.profile);
            write_json_file(folder / "report.json", to_json(report));
        }
        write_json_file(folder / "summary.json", to_json(summarize_run(folder)));

        record.metrics = summarize_metrics(report);
        record.verdict = report.feasible ? Verdict::pending : Verdict::rejected;
        if (!report.feasible) {
            record.rationale = report.timing_pass ? "exceeds device resources" : "fails timing";
        }
        entry.feasible = report.feasible;
        entry.objective = report.feasible ? report.objective : kInfeasibleObjective;
    } catch (const std::exception& e) {
        record.metrics = unevaluated_metrics();
        record.verdict = Verdict::failed;
        record.rationale = e.what();
        entry.feasible = false;
        entry.objective = kInfeasibleObjective;
    }

    const auto sequence = db_.next_sequence();
    record.point_id = make_point_id(design_id, record.source, sequence);
    record.created_at = timestamp(sequence);
    db_.append(record);

    entry.point_id = record.point_id;
    owned_points_.insert(record.point_id);
    if (record.verdict == Verdict::pending) state_.pending_verdicts.push_back(record.point_id);
    state_.evaluated.insert(design_id);
    evaluated_points_.insert(point);
    state_.history.push_back(entry);
    if (!entry.run_id.empty()) run_ids.push_back(entry.run_id);
}

void Explorer::refresh_frontier() {
    state_.frontier.clear();
    for (const auto& e : state_.history) {
        if (e.feasible && !state_.vetoed.count(e.design_id)) state_.frontier.push_back(e);
    }
    std::sort(state_.frontier.begin(), state_.frontier.end(), entry_less);
    state_.best.reset();
    if (!state_.frontier.empty()) state_.best = state_.frontier.front();
    state_.diversity_set = select_frontier(state_, config_);
}

StepOutcome Explorer::step() {
    const double previous = state_.best ? state_.best->objective : kInfeasibleObjective;

    std::optional<Transcript> transcript;
    std::size_t rejected = 0;
    const auto picks = obtain_candidates(transcript, rejected);

    StepOutcome outcome;
    for (const auto& pick : picks) {
        const auto design_id = compute_design_id(template_.template_id, pick.point, config_.workload);
        if (state_.evaluated.count(design_id)) continue;
        evaluate_candidate(pick, transcript, outcome.evaluated_run_ids);
    }
    if (transcript && outcome.evaluated_run_ids.empty()) {
        char name[32];
        std::snprintf(name, sizeof(name), "iter_%04zu", state_.iteration + 1);
        const auto folder = config_.workspace / "transcripts" / name;
        write_text_file(folder / "prompt.txt", transcript->prompt);
        write_text_file(folder / "reply.txt", transcript->reply);
    }

    refresh_frontier();
    const double current = state_.best ? state_.best->objective : kInfeasibleObjective;
    state_.stale_iterations = current < previous ? 0 : state_.stale_iterations + 1;
    ++state_.iteration;

    outcome.iteration = state_.iteration;
    outcome.best = state_.best;
    outcome.rejected = rejected;
    trace_.push_back(Json{{"iteration", state_.iteration},
                          {"evaluated", outcome.evaluated_run_ids},
                          {"rejected", rejected},
                          {"best", best_json(state_.best)}});
    return outcome;
}

Json Explorer::run() {
    stop_reason_.clear();
    while (state_.iteration < config_.max_iterations) {
        try {
            step();
        } catch (const SpaceExhausted&) {
            stop_reason_ = "space_exhausted";
            break;
        }
        if (config_.strategy != Strategy::exhaustive && state_.stale_iterations >= kConvergencePatience) {
            stop_reason_ = "converged";
            break;
        }
    }
    if (stop_reason_.empty()) stop_reason_ = "max_iterations";

    auto document = report();
    write_json_file(config_.workspace / "exploration_report.json", document);
    return document;
}

Json Explorer::report() const {
    return Json{{"strategy", to_string(config_.strategy)},
                {"seed", config_.seed},
                {"iterations", state_.iteration},
                {"stop_reason", stop_reason_},
                {"best", best_json(state_.best)},
                {"evaluated_count", state_.evaluated.size()},
                {"record_count", db_.size()},
                {"fallbacks", fallbacks_},
                {"trace", trace_}};
}

const ExplorationState& Explorer::apply_verdict(const std::string& point_id, Verdict verdict,
                                                const std::string& notes) {
    if (verdict != Verdict::accepted && verdict != Verdict::rejected) {
        throw ValidationError("verdict", "verdict must be accepted or rejected");
    }
    if (auto done = decided_.find(point_id); done != decided_.end()) {
        if (done->second == std::pair{verdict, notes}) return state_;
        throw VerdictConflict("point " + point_id + " already has a different verdict");
    }
    auto pending = std::find(state_.pending_verdicts.begin(), state_.pending_verdicts.end(), point_id);
    if (pending == state_.pending_verdicts.end()) throw UnknownPoint("no pending point " + point_id);

    const auto original = db_.find(point_id);
    if (!original) throw UnknownPoint("no data point " + point_id);
    const auto new_id = record_human_verdict(db_, *original, verdict, notes, timestamp(db_.next_sequence()));
    owned_points_.insert(new_id);

    state_.pending_verdicts.erase(pending);
    decided_[point_id] = {verdict, notes};
    if (verdict == Verdict::rejected) {
        state_.vetoed.insert(original->design_id);
        state_.accepted.erase(original->design_id);
    } else {
        state_.accepted.insert(original->design_id);
    }
    refresh_frontier();
    return state_;
}

ExplorationResult run_exploration(const ExplorationConfig& config, std::shared_ptr<ChatProvider> provider) {
    init_workspace(config.workspace);
    CostDb db(config.workspace / "db" / "datapoints.ndjson");
    Explorer explorer(config, db, std::move(provider));
    auto report = explorer.run();
    return {explorer.state(), std::move(report)};
}

}  // namespace secda_dse
