#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "secda_dse/cost_db.hpp"
#include "secda_dse/retrieval.hpp"

namespace secda_dse {

enum class ProviderKind { remote_chat, heuristic };
enum class CandidateAction { refine, rank, reject };

std::string to_string(ProviderKind kind);
std::string to_string(CandidateAction action);
std::optional<CandidateAction> candidate_action_from_string(const std::string& text);

struct AdvisorConfig {
    ProviderKind provider = ProviderKind::heuristic;
    std::string endpoint_url = "http://127.0.0.1:11434/api/chat";
    std::string model_name = "llama3.1:8b";
    double temperature = 0.2;
    std::size_t token_budget = 2048;
    int request_timeout_s = 120;
    std::uint64_t seed = 0;
    std::size_t max_data_points = 16;  // most recent points rendered into the prompt
};

AdvisorConfig load_advisor_config(const Json& document);
Json to_json(const AdvisorConfig& config);

// What the advisor sees of the exploration at one iteration.
struct ExplorationSnapshot {
    WorkloadSpec workload;
    DeviceProfile device;
    Directives directives;
    std::vector<HardwareDataPoint> recent_points{};  // oldest first
    std::set<ParameterPoint> evaluated{};
    std::set<ParameterPoint> excluded{};             // vetoed by a human reviewer
    std::vector<ParameterPoint> centers{};           // neighbourhood centres, best first
    std::optional<ParameterPoint> best{};
    std::size_t max_candidates = 4;
    std::size_t iteration = 0;
};

struct PromptSection {
    std::string name;
    std::string text;
};

inline constexpr const char* kPromptSectionOrder[] = {"SYSTEM", "CONTEXT", "DATA_POINTS", "TASK", "REASONING_STEPS"};

struct PromptBundle {
    std::vector<PromptSection> sections;
    std::size_t token_estimate = 0;

    std::string render() const;
};

struct Candidate {
    ParameterPoint point;
    CandidateAction action = CandidateAction::refine;
    std::optional<int> rank_hint;

    bool operator==(const Candidate&) const = default;
};

struct Proposal {
    std::vector<Candidate> candidates;
    std::string rationale;

    bool operator==(const Proposal&) const = default;
};

struct RejectedCandidate {
    ParameterPoint point;
    CandidateAction action = CandidateAction::refine;
    std::vector<std::string> reasons;
};

struct ParsedProposal {
    std::optional<Proposal> accepted;  // empty when no candidate survived bound checks
    std::vector<RejectedCandidate> rejected_points;
    std::vector<std::string> malformed_lines;
};

struct ChatMessage {
    std::string role;
    std::string content;
};

class ChatProvider {
public:
    virtual ~ChatProvider() = default;

    // Returns the assistant reply; throws ProviderUnreachable on transport failure.
    virtual std::string complete(const std::vector<ChatMessage>& messages, const AdvisorConfig& config) = 0;
};

/// Speaks the local-inference chat wire format:
/// POST {model, messages, stream: false, options: {temperature, seed}} -> {message: {content}}.
class HttpChatProvider : public ChatProvider {
public:
    std::string complete(const std::vector<ChatMessage>& messages, const AdvisorConfig& config) override;
};

struct Transcript {
    std::string prompt;
    std::string reply;  // every raw reply, separated when a reformat retry happened
};

struct Advice {
    std::optional<Proposal> proposal;
    std::vector<RejectedCandidate> rejected_points;
    Transcript transcript;
};

PromptBundle build_prompt(const ExplorationSnapshot& state, const std::vector<CorpusDocument>& retrieved,
                          const AdvisorConfig& config);

ParsedProposal parse_proposal(const std::string& raw, const Directives& directives, const WorkloadSpec& workload);

Proposal heuristic_advise(const ExplorationSnapshot& state, std::uint64_t seed);

// Query used to pull grounding documents for a snapshot.
std::string retrieval_query(const ExplorationSnapshot& state);

/// remote_chat: retrieve, build the prompt, one request, parse; one reformat
/// retry when the reply has no structured block. heuristic: heuristic_advise.
Advice advise(const ExplorationSnapshot& state, const AdvisorConfig& config, ChatProvider* provider,
              const RetrievalIndex* index);

}  // namespace secda_dse
