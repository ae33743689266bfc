#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <set>

#include "secda_dse/cost_db.hpp"
#include "test_support.hpp"

using namespace secda_dse;
using secda_dse::testing::TempDir;
using secda_dse::testing::vecmul_design;
using secda_dse::testing::xc7z020;

namespace {

HardwareDataPoint make_point(std::int64_t depth, std::int64_t lanes, std::int64_t length, std::size_t sequence,
                             Verdict verdict = Verdict::pending) {
    const auto design = vecmul_design(depth, lanes, 32, length);
    HardwareDataPoint point;
    point.design_id = design.design_id;
    point.point_id = make_point_id(design.design_id, DataSource::analytical, sequence);
    point.configuration = design.point;
    point.workload = design.workload;
    point.device = xc7z020().name;
    point.metrics = summarize_metrics(evaluate(design, xc7z020(), vecmul_default_profile()));
    point.verdict = verdict;
    point.created_at = logical_timestamp(sequence);
    return point;
}

HardwareDataPoint with_cycles(HardwareDataPoint point, std::int64_t cycles, bool feasible) {
    point.metrics.total_cycles = cycles;
    point.metrics.feasible = feasible;
    return point;
}

std::string file_bytes(const std::filesystem::path& path) {
    return read_text_file(path);
}

}  // namespace

TEST(CostDbAppend, CountsAndRejectsDuplicates) {
    TempDir dir;
    CostDb db(dir / "db" / "datapoints.ndjson");
    EXPECT_EQ(db.size(), 0u);
    const auto point = make_point(1024, 1, 1023, 1);
    EXPECT_EQ(db.append(point), point.point_id);
    EXPECT_EQ(db.size(), 1u);
    EXPECT_THROW(db.append(point), DuplicatePoint);
    EXPECT_EQ(db.size(), 1u);
}

TEST(CostDbAppend, FailedPointCannotBeFeasible) {
    TempDir dir;
    CostDb db(dir / "d.ndjson");
    auto point = make_point(1024, 1, 1023, 1, Verdict::failed);
    EXPECT_THROW(db.append(point), ValidationError);
    point.metrics = MetricsSummary{};
    EXPECT_NO_THROW(db.append(point));
}

TEST(CostDbAppend, ReadOnlyRefusesWrites) {
    TempDir dir;
    { CostDb writer(dir / "d.ndjson"); }
    CostDb reader(dir / "d.ndjson", CostDb::Mode::read_only);
    EXPECT_THROW(reader.append(make_point(1024, 1, 1023, 1)), StorageError);
}

TEST(CostDbQuery, EmptyDatabase) {
    TempDir dir;
    CostDb db(dir / "d.ndjson");
    EXPECT_TRUE(db.query({}).empty());
    PointFilter filter;
    filter.verdict = Verdict::accepted;
    EXPECT_TRUE(db.query(filter, "total_cycles", 3).empty());
}

TEST(CostDbQuery, InfeasibleSortsLast) {
    TempDir dir;
    CostDb db(dir / "d.ndjson");
    db.append(with_cycles(make_point(1024, 1, 1023, 1), 2060, true));
    db.append(with_cycles(make_point(1024, 2, 1023, 2), 1040, true));
    db.append(with_cycles(make_point(1024, 4, 1023, 3), 10, false));

    const auto top = db.query({}, "total_cycles", 2);
    ASSERT_EQ(top.size(), 2u);
    EXPECT_EQ(top[0].metrics.total_cycles, 1040);
    EXPECT_EQ(top[1].metrics.total_cycles, 2060);
}

TEST(CostDbQuery, FiltersRejectedPoints) {
    TempDir dir;
    CostDb db(dir / "d.ndjson");
    db.append(make_point(1024, 1, 1023, 1));
    auto rejected = make_point(1024, 2, 1023, 2, Verdict::rejected);
    rejected.rationale = "exceeds device resources";
    db.append(rejected);
    db.append(make_point(2048, 1, 1023, 3, Verdict::accepted));

    PointFilter filter;
    filter.verdict = Verdict::rejected;
    const auto hits = db.query(filter);
    ASSERT_EQ(hits.size(), 1u);
    EXPECT_EQ(hits[0], rejected);
}

TEST(CostDbQuery, UnknownMetric) {
    TempDir dir;
    CostDb db(dir / "d.ndjson");
    EXPECT_THROW(db.query({}, "happiness"), UnknownMetric);
}

TEST(CostDbQuery, FiltersByWorkloadDeviceAndFeasibility) {
    TempDir dir;
    CostDb db(dir / "d.ndjson");
    db.append(make_point(1024, 1, 1023, 1));
    db.append(make_point(1024, 1, 500, 2));
    auto other = make_point(2048, 1, 1023, 3);
    other.device = "other-device";
    other.metrics.feasible = false;
    db.append(other);

    PointFilter by_workload;
    by_workload.workload = secda_dse::testing::vecmul_workload(500);
    EXPECT_EQ(db.query(by_workload).size(), 1u);

    PointFilter by_device;
    by_device.device = "other-device";
    EXPECT_EQ(db.query(by_device).size(), 1u);

    PointFilter feasible;
    feasible.feasible = true;
    EXPECT_EQ(db.query(feasible).size(), 2u);
}

TEST(CostDbPersistence, ReopenSeesSameRecords) {
    TempDir dir;
    std::vector<HardwareDataPoint> written;
    {
        CostDb db(dir / "d.ndjson");
        for (std::size_t i = 1; i <= 4; ++i) {
            written.push_back(make_point(1024, static_cast<std::int64_t>(i), 1023, i));
            db.append(written.back());
        }
    }
    CostDb reopened(dir / "d.ndjson", CostDb::Mode::read_only);
    EXPECT_EQ(reopened.query({}), written);
    EXPECT_EQ(reopened.next_sequence(), 5u);
}

TEST(CostDbPersistence, TornFinalLineIsDroppedWithWarning) {
    TempDir dir;
    const auto file = dir / "d.ndjson";
    {
        CostDb db(file);
        db.append(make_point(1024, 1, 1023, 1));
    }
    { std::ofstream(file, std::ios::app) << R"({"point_id": "half)"; }

    CostDb reader(file, CostDb::Mode::read_only);
    EXPECT_EQ(reader.size(), 1u);
    EXPECT_EQ(reader.warnings().size(), 1u);

    CostDb writer(file);
    EXPECT_EQ(writer.size(), 1u);
    writer.append(make_point(1024, 2, 1023, 2));
    CostDb again(file, CostDb::Mode::read_only);
    EXPECT_EQ(again.size(), 2u);
    EXPECT_TRUE(again.warnings().empty());
}

TEST(CostDbPersistence, CorruptMiddleLineIsAnError) {
    TempDir dir;
    const auto file = dir / "d.ndjson";
    std::ofstream(file) << "{not json}\n" << to_json(make_point(1024, 1, 1023, 1)).dump() << "\n";
    EXPECT_THROW(CostDb(file, CostDb::Mode::read_only), StorageError);
}

TEST(CostDbProperties, AppendOnlyPrefixAndSortedQueries) {
    TempDir dir;
    const auto file = dir / "d.ndjson";
    CostDb db(file);
    std::mt19937 rng(17);
    std::set<std::string> ids;
    for (std::size_t i = 1; i <= 60; ++i) {
        const auto before = file_bytes(file);
        auto point = make_point(1024, 1 + static_cast<std::int64_t>(rng() % 8), 1 + rng() % 1023, i);
        point.metrics.feasible = rng() % 4 != 0;
        point.verdict = static_cast<Verdict>(rng() % 4);
        if (point.verdict == Verdict::failed) point.metrics.feasible = false;
        db.append(point);
        ids.insert(point.point_id);
        const auto after = file_bytes(file);
        ASSERT_EQ(after.substr(0, before.size()), before);
    }
    EXPECT_EQ(ids.size(), db.size());

    for (const std::string metric : {"total_cycles", "objective", "wall_time_ns", "dsp", "lut", "point_id"}) {
        const auto all = db.query({}, metric);
        const auto limited = db.query({}, metric, 7);
        ASSERT_EQ(all.size(), db.size());
        ASSERT_EQ(limited.size(), 7u);
        for (std::size_t i = 0; i < limited.size(); ++i) ASSERT_EQ(limited[i], all[i]);
    }
    const auto ranked = db.query({}, "total_cycles");
    for (std::size_t i = 1; i < ranked.size(); ++i) {
        const auto key = [](const HardwareDataPoint& p) {
            return p.metrics.feasible ? static_cast<double>(p.metrics.total_cycles) : kInfeasibleObjective;
        };
        ASSERT_LE(key(ranked[i - 1]), key(ranked[i]));
    }
}

class RunFolderTest : public ::testing::Test {
protected:
    TempDir dir;
    std::filesystem::path run = dir / "0001-abc";

    void SetUp() override {
        const auto design = instantiate(builtin_vecmul_template(), {1024, 1, 32}, secda_dse::testing::vecmul_workload());
        write_json_file(run / "design.json", to_json(design));
        write_json_file(run / "report.json", to_json(evaluate(design, xc7z020(), vecmul_default_profile())));
        write_source_set(emit_source(design), run / "src");
    }
};

TEST_F(RunFolderTest, SummarizesReferenceRun) {
    const auto summary = summarize_run(run);
    EXPECT_EQ(summary.run_id, "0001-abc");
    EXPECT_EQ(summary.total_cycles, 2060);
    EXPECT_EQ(summary.utilization_pct.bram_18k, 2);
    EXPECT_TRUE(summary.feasible);
    EXPECT_EQ(summary.source_files,
              (std::vector<std::string>{"build.mk", "hw/vecmul_acc.sc.h", "sw/vecmul_driver.cc"}));
    EXPECT_EQ(summarize_run(run), summary);
    EXPECT_EQ(load_run_summary(to_json(summary)), summary);
}

TEST_F(RunFolderTest, MissingReport) {
    std::filesystem::remove(run / "report.json");
    try {
        summarize_run(run);
        FAIL() << "expected MissingArtifact";
    } catch (const MissingArtifact& e) {
        EXPECT_EQ(e.artifact(), "report.json");
    }
}

TEST(ExportFinetune, RecordShapeAndCounts) {
    TempDir dir;
    CostDb db(dir / "d.ndjson");
    auto accepted = make_point(1024, 1, 1023, 1, Verdict::accepted);
    accepted.rationale = "reviewed on board";
    db.append(accepted);
    db.append(make_point(1024, 2, 1023, 2, Verdict::accepted));
    db.append(make_point(1024, 4, 1023, 3, Verdict::rejected));

    PointFilter filter;
    filter.verdict = Verdict::accepted;
    const auto out = dir / "export.ndjson";
    EXPECT_EQ(export_finetune_dataset(db, filter, out), 2u);

    std::ifstream in(out);
    std::string line;
    std::vector<Json> records;
    while (std::getline(in, line)) records.push_back(Json::parse(line));
    ASSERT_EQ(records.size(), 2u);

    const std::set<std::string> expected_keys = {"configuration", "workload", "device", "feedback", "verdict",
                                                 "rationale"};
    for (const auto& record : records) {
        std::set<std::string> keys;
        for (const auto& [k, v] : record.items()) keys.insert(k);
        EXPECT_EQ(keys, expected_keys);
        std::set<std::string> feedback;
        for (const auto& [k, v] : record["feedback"].items()) feedback.insert(k);
        EXPECT_EQ(feedback, (std::set<std::string>{"simulation_success", "latency_cycles", "resource_utilization"}));
    }
    EXPECT_EQ(records[0]["feedback"]["simulation_success"], true);
    EXPECT_EQ(records[0]["feedback"]["latency_cycles"], 2060);
    EXPECT_EQ(records[0]["rationale"], "reviewed on board");
    EXPECT_TRUE(records[1]["rationale"].is_null());
}

TEST(ExportFinetune, EmptyResultWritesEmptyFile) {
    TempDir dir;
    CostDb db(dir / "d.ndjson");
    const auto out = dir / "export.ndjson";
    EXPECT_EQ(export_finetune_dataset(db, {}, out), 0u);
    ASSERT_TRUE(std::filesystem::exists(out));
    EXPECT_EQ(std::filesystem::file_size(out), 0u);
}

TEST(DataPointJson, RoundTripAndTimestamps) {
    auto point = make_point(2048, 2, 700, 42, Verdict::rejected);
    point.rationale = "fails timing";
    EXPECT_EQ(load_data_point(to_json(point)), point);
    EXPECT_EQ(logical_timestamp(0), "1970-01-01T00:00:00Z");
    EXPECT_EQ(logical_timestamp(61), "1970-01-01T00:01:01Z");
    EXPECT_EQ(make_point_id("abc", DataSource::human, 7), "abc-human-000007");
}
