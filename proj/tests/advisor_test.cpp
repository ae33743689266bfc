#include <gtest/gtest.h>

#include <random>
#include <thread>

#include "httplib.h"
#include "secda_dse/advisor.hpp"
#include "test_support.hpp"

using namespace secda_dse;
using secda_dse::testing::ScriptedProvider;
using secda_dse::testing::vecmul_workload;
using secda_dse::testing::xc7z020;

namespace {

Directives reference_directives() {
    return Directives({1024, 2048}, {1, 2, 4}, {16, 32});
}

HardwareDataPoint data_point(const ParameterPoint& p, Verdict verdict, std::size_t sequence) {
    AcceleratorDesign design = secda_dse::testing::vecmul_design(p.buffer_depth, p.parallelism_p, p.data_width, 1023);
    HardwareDataPoint point;
    point.design_id = design.design_id;
    point.point_id = make_point_id(design.design_id, DataSource::analytical, sequence);
    point.configuration = p;
    point.workload = design.workload;
    point.device = xc7z020().name;
    point.metrics = summarize_metrics(evaluate(design, xc7z020(), vecmul_default_profile()));
    point.verdict = verdict;
    point.created_at = logical_timestamp(sequence);
    return point;
}

ExplorationSnapshot fixed_snapshot() {
    ExplorationSnapshot s{vecmul_workload(1023), xc7z020(), reference_directives()};
    s.recent_points.push_back(data_point({1024, 1, 32}, Verdict::accepted, 1));
    auto rejected = data_point({2048, 4, 16}, Verdict::rejected, 2);
    rejected.rationale = "reviewer: too many BRAMs";
    s.recent_points.push_back(rejected);
    s.evaluated = {{1024, 1, 32}, {2048, 4, 16}};
    s.centers = {{1024, 1, 32}};
    s.best = ParameterPoint{1024, 1, 32};
    s.iteration = 2;
    return s;
}

std::vector<CorpusDocument> fixed_docs() {
    return {{"code/a.cc", DocumentKind::code_fragment, "void load(hls::stream<int>& in);", 2},
            {"api/b.txt", DocumentKind::api_doc, "acc container stream_in stream_out", 4}};
}

AdvisorConfig remote_config() {
    AdvisorConfig config;
    config.provider = ProviderKind::remote_chat;
    return config;
}

const char* kValidReply =
    "The single lane point is bound by Recv, so add lanes.\n"
    "```candidates\n"
    "depth=1024 P=2 width=32 action=refine\n"
    "```\n";

}  // namespace

TEST(BuildPrompt, DeterministicAndOrdered) {
    const auto a = build_prompt(fixed_snapshot(), fixed_docs(), AdvisorConfig{});
    const auto b = build_prompt(fixed_snapshot(), fixed_docs(), AdvisorConfig{});
    EXPECT_EQ(a.render(), b.render());

    ASSERT_EQ(a.sections.size(), 5u);
    for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(a.sections[i].name, kPromptSectionOrder[i]);

    const auto text = a.render();
    std::size_t cursor = 0;
    for (int step = 1; step <= 5; ++step) {
        const auto at = text.find("STEP " + std::to_string(step) + ":", cursor);
        ASSERT_NE(at, std::string::npos) << step;
        cursor = at;
    }
    EXPECT_NE(text.find("Restate constraints"), std::string::npos);
    EXPECT_NE(text.find("Emit structured output"), std::string::npos);
}

TEST(BuildPrompt, RejectedPointIsFlagged) {
    const auto prompt = build_prompt(fixed_snapshot(), {}, AdvisorConfig{});
    const auto& data = prompt.sections[2];
    ASSERT_EQ(data.name, "DATA_POINTS");
    EXPECT_NE(data.text.find("depth=2048 P=4 width=16"), std::string::npos);
    EXPECT_NE(data.text.find("verdict=rejected"), std::string::npos);
    EXPECT_NE(data.text.find("too many BRAMs"), std::string::npos);
}

TEST(BuildPrompt, BudgetBounds) {
    AdvisorConfig config;
    config.token_budget = 1;
    EXPECT_THROW(build_prompt(fixed_snapshot(), fixed_docs(), config), BudgetExceeded);

    config.token_budget = 512;
    const auto prompt = build_prompt(fixed_snapshot(), fixed_docs(), config);
    EXPECT_LE(prompt.token_estimate, 512u);
    EXPECT_EQ(prompt.token_estimate, whitespace_token_count(prompt.render()));
}

TEST(BuildPrompt, ShedsContextBeforeDataPoints) {
    std::vector<CorpusDocument> docs;
    std::string big;
    for (int i = 0; i < 400; ++i) big += "token ";
    docs.push_back({"code/big.cc", DocumentKind::code_fragment, big, 400});
    AdvisorConfig config;
    config.token_budget = 512;
    const auto prompt = build_prompt(fixed_snapshot(), docs, config);
    EXPECT_EQ(prompt.sections[1].text, "(none)");
    EXPECT_NE(prompt.sections[2].text.find("verdict=rejected"), std::string::npos);
}

TEST(ParseProposal, AcceptsInBoundsCandidate) {
    const auto parsed = parse_proposal(kValidReply, reference_directives(), vecmul_workload(1023));
    ASSERT_TRUE(parsed.accepted);
    ASSERT_EQ(parsed.accepted->candidates.size(), 1u);
    EXPECT_EQ(parsed.accepted->candidates[0].point, (ParameterPoint{1024, 2, 32}));
    EXPECT_EQ(parsed.accepted->candidates[0].action, CandidateAction::refine);
    EXPECT_EQ(parsed.accepted->rationale, "The single lane point is bound by Recv, so add lanes.");
    EXPECT_TRUE(parsed.rejected_points.empty());
}

TEST(ParseProposal, OutOfBoundsDepthIsRejectedWithReason) {
    const auto parsed = parse_proposal("```\ndepth=4096 P=1 width=32 action=refine\n```",
                                       reference_directives(), vecmul_workload(1023));
    EXPECT_FALSE(parsed.accepted);
    ASSERT_EQ(parsed.rejected_points.size(), 1u);
    EXPECT_EQ(parsed.rejected_points[0].point, (ParameterPoint{4096, 1, 32}));
    EXPECT_EQ(parsed.rejected_points[0].reasons, std::vector<std::string>{"buffer_depth not in directive set"});
}

TEST(ParseProposal, FreeTextIsUnparseable) {
    EXPECT_THROW(parse_proposal("I would try more lanes.", reference_directives(), vecmul_workload(1023)),
                 ProposalUnparseable);
    EXPECT_THROW(parse_proposal("```\nnothing useful\n```", reference_directives(), vecmul_workload(1023)),
                 ProposalUnparseable);
}

TEST(ParseProposal, DropsDuplicatesAndCollectsMalformedLines) {
    const auto parsed = parse_proposal(
        "```candidates\n"
        "depth=1024 P=2 width=32 action=rank rank=1\n"
        "depth=1024 P=2 width=32 action=refine\n"
        "- depth=2048 P=4 width=16 action=RANK rank=1\n"
        "depth=lots P=2 width=32 action=refine\n"
        "depth=1024 P=1 width=32 action=explode\n"
        "```",
        reference_directives(), vecmul_workload(1023));
    ASSERT_TRUE(parsed.accepted);
    ASSERT_EQ(parsed.accepted->candidates.size(), 2u);
    EXPECT_EQ(parsed.accepted->candidates[0].rank_hint, 1);
    EXPECT_EQ(parsed.accepted->candidates[1].point, (ParameterPoint{2048, 4, 16}));
    EXPECT_FALSE(parsed.accepted->candidates[1].rank_hint.has_value());
    EXPECT_EQ(parsed.malformed_lines.size(), 2u);
}

TEST(ParseProposal, EveryAcceptedCandidateIsValid) {
    std::mt19937 rng(31);
    const auto directives = reference_directives();
    const auto workload = vecmul_workload(1023);
    for (int trial = 0; trial < 200; ++trial) {
        std::string reply = "```\n";
        for (int i = 0; i < 5; ++i) {
            reply += "depth=" + std::to_string(512 << (rng() % 4)) + " P=" + std::to_string(1 << (rng() % 4)) +
                     " width=" + std::to_string(8 << (rng() % 3)) + " action=refine\n";
        }
        reply += "```\n";
        const auto parsed = parse_proposal(reply, directives, workload);
        if (!parsed.accepted) continue;
        for (const auto& c : parsed.accepted->candidates) ASSERT_TRUE(validate_point(c.point, workload, directives).valid);
    }
}

TEST(Advise, RemoteProviderPassthrough) {
    ScriptedProvider provider({kValidReply});
    const auto advice = advise(fixed_snapshot(), remote_config(), &provider, nullptr);
    ASSERT_TRUE(advice.proposal);
    EXPECT_EQ(advice.proposal->candidates.size(), 1u);
    EXPECT_EQ(provider.calls(), 1u);
    EXPECT_EQ(advice.transcript.reply, kValidReply);
    EXPECT_NE(advice.transcript.prompt.find("## REASONING_STEPS"), std::string::npos);
}

TEST(Advise, ReformatRetryThenGiveUp) {
    ScriptedProvider prose({"Let me think about it."});
    EXPECT_THROW(advise(fixed_snapshot(), remote_config(), &prose, nullptr), ProposalUnparseable);
    EXPECT_EQ(prose.calls(), 2u);
    ASSERT_EQ(prose.last_messages().size(), 3u);
    EXPECT_EQ(prose.last_messages()[1].role, "assistant");

    ScriptedProvider recovers({"Let me think about it.", kValidReply});
    const auto advice = advise(fixed_snapshot(), remote_config(), &recovers, nullptr);
    ASSERT_TRUE(advice.proposal);
    EXPECT_EQ(recovers.calls(), 2u);
}

TEST(Advise, RetrievedContextReachesThePrompt) {
    const auto index = build_index(secda_dse::testing::data_dir() / "corpus");
    ScriptedProvider provider({kValidReply});
    const auto advice = advise(fixed_snapshot(), remote_config(), &provider, &index);
    EXPECT_EQ(advice.transcript.prompt.find("## CONTEXT\n(none)"), std::string::npos);
}

TEST(Advise, HeuristicIsDeterministic) {
    AdvisorConfig config;
    config.seed = 9;
    const auto a = advise(fixed_snapshot(), config, nullptr, nullptr);
    const auto b = advise(fixed_snapshot(), config, nullptr, nullptr);
    ASSERT_TRUE(a.proposal);
    EXPECT_EQ(*a.proposal, *b.proposal);
}

TEST(HeuristicAdvise, CoversNeighborsOfBest) {
    ExplorationSnapshot s{vecmul_workload(200), xc7z020(), Directives({256, 512, 1024}, {1, 2, 4}, {32})};
    s.best = ParameterPoint{512, 2, 32};
    s.centers = {*s.best};
    s.evaluated = {*s.best};
    s.max_candidates = 5;
    const auto proposal = heuristic_advise(s, 1);
    std::set<ParameterPoint> proposed;
    for (const auto& c : proposal.candidates) proposed.insert(c.point);
    for (const ParameterPoint& n : {ParameterPoint{256, 2, 32}, ParameterPoint{1024, 2, 32}, ParameterPoint{512, 1, 32},
                                    ParameterPoint{512, 4, 32}}) {
        EXPECT_TRUE(proposed.count(n)) << to_string(n);
    }
    EXPECT_FALSE(proposed.count(*s.best));
}

TEST(HeuristicAdvise, EmptyHistorySamplesDeterministically) {
    ExplorationSnapshot s{vecmul_workload(1023), xc7z020(), reference_directives()};
    const auto a = heuristic_advise(s, 42);
    const auto b = heuristic_advise(s, 42);
    EXPECT_EQ(a, b);
    EXPECT_EQ(a.candidates.size(), 4u);
    std::set<ParameterPoint> unique;
    for (const auto& c : a.candidates) {
        EXPECT_TRUE(validate_point(c.point, s.workload, s.directives).valid);
        unique.insert(c.point);
    }
    EXPECT_EQ(unique.size(), a.candidates.size());
}

TEST(HeuristicAdvise, ExhaustedSpace) {
    ExplorationSnapshot s{vecmul_workload(1023), xc7z020(), Directives({1024}, {1, 2}, {32})};
    s.evaluated = {{1024, 1, 32}, {1024, 2, 32}};
    EXPECT_THROW(heuristic_advise(s, 0), SpaceExhausted);
    s.evaluated = {{1024, 1, 32}};
    s.excluded = {{1024, 2, 32}};
    EXPECT_THROW(heuristic_advise(s, 0), SpaceExhausted);
}

TEST(HeuristicAdvise, NeverProposesEvaluatedOrInvalidPoints) {
    std::mt19937 rng(3);
    const auto directives = Directives({512, 1024, 2048}, {1, 2, 4, 8}, {16, 32});
    const auto all = enumerate_points(directives);
    for (int trial = 0; trial < 200; ++trial) {
        ExplorationSnapshot s{vecmul_workload(1 + rng() % 2048), xc7z020(), directives};
        for (const auto& p : all) {
            if (rng() % 3 == 0) s.evaluated.insert(p);
        }
        if (!s.evaluated.empty()) s.centers = {*s.evaluated.begin()};
        s.max_candidates = 1 + rng() % 6;
        s.iteration = trial;
        try {
            const auto proposal = heuristic_advise(s, trial);
            ASSERT_LE(proposal.candidates.size(), s.max_candidates);
            ASSERT_FALSE(proposal.candidates.empty());
            for (const auto& c : proposal.candidates) {
                ASSERT_FALSE(s.evaluated.count(c.point));
                ASSERT_TRUE(validate_point(c.point, s.workload, s.directives).valid);
            }
        } catch (const SpaceExhausted&) {
        }
    }
}

TEST(HttpChatProvider, SpeaksChatWireFormat) {
    httplib::Server server;
    Json seen;
    server.Post("/api/chat", [&](const httplib::Request& req, httplib::Response& res) {
        seen = Json::parse(req.body);
        res.set_content(Json{{"message", {{"role", "assistant"}, {"content", kValidReply}}}}.dump(),
                        "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    if (port <= 0) GTEST_SKIP() << "loopback sockets unavailable";
    std::thread worker([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    AdvisorConfig config = remote_config();
    config.endpoint_url = "http://127.0.0.1:" + std::to_string(port) + "/api/chat";
    config.request_timeout_s = 5;
    config.seed = 5;
    HttpChatProvider provider;
    const auto reply = provider.complete({{"user", "hello"}}, config);
    server.stop();
    worker.join();

    EXPECT_EQ(reply, kValidReply);
    EXPECT_EQ(seen["model"], config.model_name);
    EXPECT_EQ(seen["stream"], false);
    EXPECT_EQ(seen["messages"][0]["content"], "hello");
    EXPECT_EQ(seen["options"]["seed"], 5);
}

TEST(HttpChatProvider, UnreachableEndpoint) {
    AdvisorConfig config = remote_config();
    config.endpoint_url = "http://127.0.0.1:1/api/chat";
    config.request_timeout_s = 2;
    HttpChatProvider provider;
    EXPECT_THROW(provider.complete({{"user", "hello"}}, config), ProviderUnreachable);
}

TEST(AdvisorConfigJson, RoundTrip) {
    AdvisorConfig config = remote_config();
    config.token_budget = 900;
    const auto back = load_advisor_config(to_json(config));
    EXPECT_EQ(to_json(back), to_json(config));
    EXPECT_THROW(load_advisor_config(Json{{"provider", "oracle"}}), ValidationError);
    EXPECT_THROW(load_advisor_config(Json{{"token_budget", 0}}), ValidationError);
}
