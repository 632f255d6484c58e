#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <random>

#include "iotbc/ordering.hpp"

#include "batch_oracle.hpp"

using namespace iotbc;

TEST_CASE("batch config round trips through json and validates") {
    BatchConfig cfg = testsupport::bc(10, 512 * 1024, 10 * 1024 * 1024, 2000);
    CHECK(cfg.valid());
    auto j = cfg.toJson();
    CHECK(j["maxMessageCount"] == 10);
    CHECK(j["preferredMaxBytes"] == 512 * 1024);
    CHECK(j["absoluteMaxBytes"] == 10 * 1024 * 1024);
    CHECK(j["batchTimeoutMs"] == 2000);
    auto back = BatchConfig::fromJson(j);
    REQUIRE(back.has_value());
    CHECK(back->maxMessageCount == cfg.maxMessageCount);
    CHECK(back->preferredMaxBytes == cfg.preferredMaxBytes);
    CHECK(back->absoluteMaxBytes == cfg.absoluteMaxBytes);
    CHECK(back->batchTimeoutMs == cfg.batchTimeoutMs);

    BatchConfig bad = cfg;
    bad.absoluteMaxBytes = cfg.preferredMaxBytes - 1;
    CHECK_FALSE(bad.valid());
    bad = cfg;
    bad.maxMessageCount = 0;
    CHECK_FALSE(bad.valid());
    bad = cfg;
    bad.batchTimeoutMs = 0;
    CHECK_FALSE(bad.valid());

    // Missing fields fall back to defaults; bad values are refused.
    auto defaults = BatchConfig::fromJson(Json::object());
    REQUIRE(defaults.has_value());
    CHECK(defaults->maxMessageCount == BatchConfig{}.maxMessageCount);
    CHECK_FALSE(BatchConfig::fromJson(Json{{"maxMessageCount", "ten"}}).has_value());
    CHECK_FALSE(BatchConfig::fromJson(Json{{"maxMessageCount", 0}}).has_value());
    CHECK_FALSE(BatchConfig::fromJson(Json::array()).has_value());
}

TEST_CASE("pinned cutting sequences") {
    auto cases = testsupport::batchOracleCases();
    REQUIRE(cases.size() >= 20);
    for (const auto& c : cases) {
        CAPTURE(c.name);
        CHECK(testsupport::runBatchOracleCase(c) == "");
    }
}

// Random streams: every accepted envelope lands in exactly one batch, in
// arrival order, and no batch breaks the count or byte caps.
TEST_CASE("random streams keep the cutting invariants") {
    std::mt19937_64 rng(0x0badcafe);
    for (int round = 0; round < 60; ++round) {
        BatchConfig cfg;
        cfg.maxMessageCount = 1 + std::int64_t(rng() % 8);
        cfg.preferredMaxBytes = 50 + std::int64_t(rng() % 200);
        cfg.absoluteMaxBytes = cfg.preferredMaxBytes + std::int64_t(rng() % 200);
        cfg.batchTimeoutMs = 100 + std::int64_t(rng() % 900);
        REQUIRE(cfg.valid());

        BatchCutter cutter(cfg);
        std::int64_t now = 0;
        std::vector<std::vector<Bytes>> batches;
        std::vector<int> accepted;
        int messages = 40 + int(rng() % 40);
        for (int i = 1; i <= messages; ++i) {
            now += std::int64_t(rng() % (cfg.batchTimeoutMs / 2));
            if (rng() % 4 == 0) {
                if (auto cut = cutter.onTimeout(now)) batches.push_back(std::move(*cut));
            }
            std::int64_t size = 1 + std::int64_t(rng() % (cfg.absoluteMaxBytes + 40));
            Bytes env(static_cast<std::size_t>(size), 0);
            env[0] = static_cast<std::uint8_t>(i % 251);
            auto r = cutter.enqueue(std::move(env), now);
            CHECK(r.rejected == (size > cfg.absoluteMaxBytes));
            if (!r.rejected) accepted.push_back(i % 251);
            for (auto& cut : r.cuts) batches.push_back(std::move(cut));
        }
        // Final flush so every accepted envelope is accounted for.
        now += cfg.batchTimeoutMs;
        if (auto cut = cutter.onTimeout(now)) batches.push_back(std::move(*cut));
        CHECK(cutter.pendingCount() == 0);

        std::vector<int> flat;
        for (const auto& cut : batches) {
            REQUIRE(!cut.empty());
            CHECK(std::int64_t(cut.size()) <= cfg.maxMessageCount);
            std::int64_t bytes = 0;
            for (const auto& m : cut) {
                CHECK(std::int64_t(m.size()) <= cfg.absoluteMaxBytes);
                bytes += std::int64_t(m.size());
                flat.push_back(int(m[0]));
            }
            // Only a lone oversize envelope may exceed the soft cap.
            if (bytes > cfg.preferredMaxBytes) CHECK(cut.size() == 1);
        }
        CHECK(flat == accepted);
    }
}

TEST_CASE("timer deadline is exposed while a batch is open") {
    BatchCutter cutter(testsupport::bc(10, 100, 200, 1000));
    CHECK_FALSE(cutter.timerDeadline().has_value());
    cutter.enqueue(Bytes(10, 1), 400);
    REQUIRE(cutter.timerDeadline().has_value());
    CHECK(*cutter.timerDeadline() == 1400);
    cutter.onTimeout(1400);
    CHECK_FALSE(cutter.timerDeadline().has_value());
}
