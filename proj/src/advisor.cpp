#include "secda_dse/advisor.hpp"

#include <algorithm>
#include <cstdio>
#include <random>
#include <regex>
#include <sstream>

#include "httplib.h"

namespace secda_dse {

namespace {

constexpr const char* kReformatInstruction =
    "Your previous reply did not contain the structured block. Reply again with only a fenced "
    "```candidates block, one candidate per line in the form: "
    "depth=<int> P=<int> width=<int> action=<refine|rank|reject>";

std::string join(const auto& values, const char* separator = ", ") {
    std::ostringstream out;
    bool first = true;
    for (const auto& v : values) {
        if (!first) out << separator;
        out << v;
        first = false;
    }
    return out.str();
}

std::string format_ns(double value) {
    char buffer[32];
    std::snprintf(buffer, sizeof(buffer), "%.2f", value);
    return buffer;
}

std::string render_point_line(const HardwareDataPoint& p) {
    const auto& m = p.metrics;
    std::ostringstream out;
    out << "- " << to_string(p.configuration) << " cycles=" << m.total_cycles << " bram=" << m.utilization_pct.bram_18k
        << "% dsp=" << m.utilization_pct.dsp << "% ff=" << m.utilization_pct.ff << "% lut=" << m.utilization_pct.lut
        << "% feasible=" << (m.feasible ? "true" : "false") << " verdict=" << to_string(p.verdict)
        << " source=" << to_string(p.source);
    if (p.rationale && !p.rationale->empty()) {
        auto note = *p.rationale;
        std::replace(note.begin(), note.end(), '\n', ' ');
        out << " note=\"" << note << "\"";
    }
    return out.str();
}

std::string system_section() {
    return "You are the reasoning stage of an FPGA accelerator design space exploration loop. "
           "You analyse evaluated hardware data points and propose the next accelerator "
           "configurations to evaluate. Only propose values from the directive sets.";
}

std::string reasoning_section(std::size_t max_candidates) {
    std::ostringstream out;
    out << "STEP 1: Restate constraints. List the workload length, device capacities, clock target and directive sets.\n"
        << "STEP 2: Analyze prior data points. Compare latency and utilization of accepted, rejected and failed points.\n"
        << "STEP 3: Identify bottleneck. Name the module or resource that limits latency or feasibility.\n"
        << "STEP 4: Propose candidates. Choose up to " << max_candidates
        << " unevaluated configurations that address the bottleneck and keep diversity.\n"
        << "STEP 5: Emit structured output. End with a fenced block in exactly this form:\n"
        << "```candidates\n"
        << "depth=<int> P=<int> width=<int> action=<refine|rank|reject>\n"
        << "```";
    return out.str();
}

std::string task_section(const ExplorationSnapshot& s) {
    std::ostringstream out;
    out << "Workload: " << to_string(s.workload.kernel_kind) << " '" << s.workload.name
        << "', L=" << s.workload.length_l << ", element width " << s.workload.data_width << " bits.\n"
        << "Device: " << s.device.name << " (BRAM_18K " << s.device.bram_18k << ", DSP " << s.device.dsp << ", FF "
        << s.device.ff << ", LUT " << s.device.lut << "), clock target " << format_ns(s.device.clock_target_ns)
        << " ns.\n"
        << "Directives: buffer_depth {" << join(s.directives.buffer_depth()) << "}; parallelism_P {"
        << join(s.directives.parallelism_p()) << "}; data_width {" << join(s.directives.data_width()) << "}.\n"
        << "Rules: buffer_depth >= L; parallelism_P <= L.\n";
    if (s.best) out << "Best so far: " << to_string(*s.best) << ".\n";
    out << "Already evaluated: " << s.evaluated.size() << " configurations; do not repeat them.\n"
        << "Action: propose up to " << s.max_candidates
        << " new candidates that minimise total cycles while staying within device capacity.";
    return out.str();
}

PromptBundle assemble(const ExplorationSnapshot& s, const std::vector<CorpusDocument>& context,
                      const std::vector<HardwareDataPoint>& points) {
    PromptBundle bundle;
    bundle.sections.push_back({"SYSTEM", system_section()});

    std::ostringstream ctx;
    if (context.empty()) ctx << "(none)";
    for (std::size_t i = 0; i < context.size(); ++i) {
        if (i > 0) ctx << "\n";
        ctx << "[" << (i + 1) << "] " << context[i].doc_id << " (" << to_string(context[i].kind) << ")\n"
            << context[i].text;
    }
    bundle.sections.push_back({"CONTEXT", ctx.str()});

    std::ostringstream data;
    if (points.empty()) data << "(none)";
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (i > 0) data << "\n";
        data << render_point_line(points[i]);
    }
    bundle.sections.push_back({"DATA_POINTS", data.str()});

    bundle.sections.push_back({"TASK", task_section(s)});
    bundle.sections.push_back({"REASONING_STEPS", reasoning_section(s.max_candidates)});
    bundle.token_estimate = whitespace_token_count(bundle.render());
    return bundle;
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

struct ParsedUrl {
    std::string origin;  // scheme://host[:port]
    std::string path;
};

ParsedUrl split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ProviderUnreachable("malformed endpoint_url '" + url + "'");
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

std::string to_string(ProviderKind kind) {
    return kind == ProviderKind::remote_chat ? "remote_chat" : "heuristic";
}

std::string to_string(CandidateAction action) {
    switch (action) {
        case CandidateAction::refine: return "refine";
        case CandidateAction::rank: return "rank";
        case CandidateAction::reject: return "reject";
    }
    return "unknown";
}

std::optional<CandidateAction> candidate_action_from_string(const std::string& text) {
    std::string lower = text;
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    if (lower == "refine") return CandidateAction::refine;
    if (lower == "rank") return CandidateAction::rank;
    if (lower == "reject") return CandidateAction::reject;
    return std::nullopt;
}

AdvisorConfig load_advisor_config(const Json& document) {
    FieldReader reader(document, "advisor");
    AdvisorConfig config;
    const auto provider = reader.optional_or<std::string>("provider", "heuristic");
    if (provider == "remote_chat") config.provider = ProviderKind::remote_chat;
    else if (provider == "heuristic") config.provider = ProviderKind::heuristic;
    else throw ValidationError("provider", "unknown provider '" + provider + "'");
    config.endpoint_url = reader.optional_or<std::string>("endpoint_url", config.endpoint_url);
    config.model_name = reader.optional_or<std::string>("model_name", config.model_name);
    config.temperature = reader.optional_or<double>("temperature", config.temperature);
    config.token_budget = reader.optional_or<std::size_t>("token_budget", config.token_budget);
    config.request_timeout_s = reader.optional_or<int>("request_timeout_s", config.request_timeout_s);
    config.seed = reader.optional_or<std::uint64_t>("seed", config.seed);
    config.max_data_points = reader.optional_or<std::size_t>("max_data_points", config.max_data_points);
    reader.finish();
    if (config.token_budget == 0) throw ValidationError("token_budget", "token_budget must be > 0");
    if (config.temperature < 0) throw ValidationError("temperature", "temperature must be >= 0");
    return config;
}

Json to_json(const AdvisorConfig& config) {
    return Json{{"provider", to_string(config.provider)},
                {"endpoint_url", config.endpoint_url},
                {"model_name", config.model_name},
                {"temperature", config.temperature},
                {"token_budget", config.token_budget},
                {"request_timeout_s", config.request_timeout_s},
                {"seed", config.seed},
                {"max_data_points", config.max_data_points}};
}

std::string PromptBundle::render() const {
    std::string out;
    for (const auto& section : sections) {
        if (!out.empty()) out += "\n\n";
        out += "## " + section.name + "\n" + section.text;
    }
    out += "\n";
    return out;
}

PromptBundle build_prompt(const ExplorationSnapshot& state, const std::vector<CorpusDocument>& retrieved,
                          const AdvisorConfig& config) {
    std::vector<CorpusDocument> context = retrieved;
    std::vector<HardwareDataPoint> points = state.recent_points;
    if (points.size() > config.max_data_points) {
        points.erase(points.begin(), points.end() - static_cast<std::ptrdiff_t>(config.max_data_points));
    }

    // Shed retrieved context first (lowest rank last), then the oldest data points.
    auto bundle = assemble(state, context, points);
    while (bundle.token_estimate > config.token_budget && !context.empty()) {
        context.pop_back();
        bundle = assemble(state, context, points);
    }
    while (bundle.token_estimate > config.token_budget && !points.empty()) {
        points.erase(points.begin());
        bundle = assemble(state, context, points);
    }
    if (bundle.token_estimate > config.token_budget) {
        throw BudgetExceeded("minimal prompt needs " + std::to_string(bundle.token_estimate) + " tokens, budget is " +
                             std::to_string(config.token_budget));
    }
    return bundle;
}

ParsedProposal parse_proposal(const std::string& raw, const Directives& directives, const WorkloadSpec& workload) {
    static const std::regex kCandidateLine(
        R"(^\s*(?:[-*]\s*)?depth\s*=\s*(\d+)\s+p\s*=\s*(\d+)\s+width\s*=\s*(\d+)\s+action\s*=\s*([A-Za-z_]+)(?:\s+rank\s*=\s*(\d+))?\s*$)",
        std::regex::icase);

    // Split into fenced blocks; text outside the fences is the rationale.
    std::vector<std::vector<std::string>> blocks;
    std::string rationale;
    bool inside = false;
    std::istringstream in(raw);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto first = line.find_first_not_of(" \t");
        if (first != std::string::npos && line.compare(first, 3, "```") == 0) {
            inside = !inside;
            if (inside) blocks.emplace_back();
            continue;
        }
        if (inside) blocks.back().push_back(line);
        else rationale += line + "\n";
    }

    for (const auto& block : blocks) {
        ParsedProposal parsed;
        Proposal proposal;
        std::set<ParameterPoint> seen;
        std::set<int> hints;
        bool any_candidate = false;

        for (const auto& text : block) {
            if (text.find_first_not_of(" \t") == std::string::npos) continue;
            std::smatch m;
            std::optional<CandidateAction> action;
            if (std::regex_match(text, m, kCandidateLine)) action = candidate_action_from_string(m[4].str());
            if (!action) {
                parsed.malformed_lines.push_back(text);
                continue;
            }
            any_candidate = true;

            ParameterPoint point;
            try {
                point = {std::stoll(m[1].str()), std::stoll(m[2].str()), std::stoi(m[3].str())};
            } catch (const std::out_of_range&) {
                parsed.malformed_lines.push_back(text);
                continue;
            }
            auto validity = validate_point(point, workload, directives);
            if (!validity.valid) {
                parsed.rejected_points.push_back({point, *action, validity.reasons});
                continue;
            }
            if (!seen.insert(point).second) continue;

            Candidate candidate{point, *action, std::nullopt};
            if (m[5].matched) {
                const int hint = std::stoi(m[5].str());
                if (hints.insert(hint).second) candidate.rank_hint = hint;
            }
            proposal.candidates.push_back(candidate);
        }

        if (!any_candidate) continue;
        const auto begin = rationale.find_first_not_of(" \t\n");
        const auto end = rationale.find_last_not_of(" \t\n");
        proposal.rationale = begin == std::string::npos ? "" : rationale.substr(begin, end - begin + 1);
        if (!proposal.candidates.empty()) parsed.accepted = std::move(proposal);
        return parsed;
    }
    throw ProposalUnparseable("reply contains no fenced candidate block");
}

Proposal heuristic_advise(const ExplorationSnapshot& state, std::uint64_t seed) {
    auto open = [&](const ParameterPoint& p) {
        return !state.evaluated.count(p) && !state.excluded.count(p) &&
               validate_point(p, state.workload, state.directives).valid;
    };

    std::vector<ParameterPoint> unexplored;
    for (const auto& p : enumerate_points(state.directives)) {
        if (open(p)) unexplored.push_back(p);
    }
    if (unexplored.empty()) throw SpaceExhausted("every point in the directive space has been evaluated");

    const std::size_t slots = std::max<std::size_t>(1, state.max_candidates);
    std::vector<ParameterPoint> centers = state.centers;
    if (centers.empty() && state.best) centers.push_back(*state.best);

    Proposal proposal;
    std::set<ParameterPoint> chosen;
    const std::size_t refine_slots = slots > 1 ? slots - 1 : 1;
    for (const auto& center : centers) {
        if (!state.directives.contains(center)) continue;
        for (const auto& n : neighbor_points(center, state.directives)) {
            if (proposal.candidates.size() >= refine_slots) break;
            if (open(n) && chosen.insert(n).second) proposal.candidates.push_back({n, CandidateAction::refine, {}});
        }
    }

    std::vector<ParameterPoint> pool;
    for (const auto& p : unexplored) {
        if (!chosen.count(p)) pool.push_back(p);
    }
    const std::size_t random_count = proposal.candidates.empty() ? slots : (slots > 1 ? 1 : 0);
    std::uint64_t state_word = splitmix64(seed ^ splitmix64(state.iteration));
    for (std::size_t i = 0; i < random_count && !pool.empty(); ++i) {
        state_word = splitmix64(state_word);
        const auto pick = static_cast<std::size_t>(state_word % pool.size());
        proposal.candidates.push_back({pool[pick], CandidateAction::rank, {}});
        pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pick));
    }

    std::ostringstream why;
    if (centers.empty()) {
        why << "no evaluated feasible point yet; sampled " << proposal.candidates.size()
            << " unexplored configurations from the directive space";
    } else {
        why << "refine neighbours of " << to_string(centers.front()) << " plus a seeded random unexplored point";
    }
    proposal.rationale = why.str();
    return proposal;
}

std::string retrieval_query(const ExplorationSnapshot& state) {
    return to_string(state.workload.kernel_kind) +
           " accelerator load compute store buffer depth parallelism data width stream " + state.device.name;
}

std::string HttpChatProvider::complete(const std::vector<ChatMessage>& messages, const AdvisorConfig& config) {
    const auto url = split_url(config.endpoint_url);
    httplib::Client client(url.origin);
    client.set_connection_timeout(config.request_timeout_s, 0);
    client.set_read_timeout(config.request_timeout_s, 0);
    client.set_write_timeout(config.request_timeout_s, 0);

    Json body{{"model", config.model_name},
              {"messages", Json::array()},
              {"stream", false},
              {"options", {{"temperature", config.temperature}, {"seed", config.seed}}}};
    for (const auto& m : messages) body["messages"].push_back(Json{{"role", m.role}, {"content", m.content}});

    auto response = client.Post(url.path, body.dump(), "application/json");
    if (!response) {
        throw ProviderUnreachable("chat endpoint " + config.endpoint_url + " unreachable: " +
                                  httplib::to_string(response.error()));
    }
    if (response->status < 200 || response->status >= 300) {
        throw ProviderUnreachable("chat endpoint returned HTTP " + std::to_string(response->status));
    }
    try {
        const auto reply = Json::parse(response->body);
        return reply.at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw ProviderUnreachable(std::string("malformed chat response: ") + e.what());
    }
}

Advice advise(const ExplorationSnapshot& state, const AdvisorConfig& config, ChatProvider* provider,
              const RetrievalIndex* index) {
    Advice advice;
    if (config.provider == ProviderKind::heuristic) {
        advice.proposal = heuristic_advise(state, config.seed);
        return advice;
    }
    if (provider == nullptr) throw ProviderUnreachable("no chat provider configured");

    std::vector<CorpusDocument> context;
    if (index != nullptr) {
        context = trim_to_budget(index->retrieve(retrieval_query(state), 8), *index, config.token_budget / 2);
    }
    const auto prompt = build_prompt(state, context, config);
    advice.transcript.prompt = prompt.render();

    std::vector<ChatMessage> messages{{"user", advice.transcript.prompt}};
    std::string reply = provider->complete(messages, config);
    advice.transcript.reply = reply;

    ParsedProposal parsed;
    try {
        parsed = parse_proposal(reply, state.directives, state.workload);
    } catch (const ProposalUnparseable&) {
        messages.push_back({"assistant", reply});
        messages.push_back({"user", kReformatInstruction});
        reply = provider->complete(messages, config);
        advice.transcript.reply += "\n----- reformat retry -----\n" + reply;
        parsed = parse_proposal(reply, state.directives, state.workload);
    }
    advice.proposal = std::move(parsed.accepted);
    advice.rejected_points = std::move(parsed.rejected_points);
    return advice;
}

}  // namespace secda_dse
