#include <gtest/gtest.h>

#include "support/random.hpp"
#include "support/search_oracle.hpp"

using namespace dalr;
using namespace dalr::testing;

namespace {

struct TinyTask {
    Network net;
    DenseMatrix train;
    LabeledBatch val;
};

// 32 → 16 → 16 → 4, labelled by the network itself so the baseline is exact.
TinyTask tiny_task(std::uint64_t seed)
{
    Rng rng(seed);
    Network net({random_layer(16, 32, rng), random_layer(16, 16, rng), random_layer(4, 16, rng)},
                {Activation::Relu, Activation::Relu, Activation::None});
    DenseMatrix train = random_matrix(32, 200, rng);
    DenseMatrix val_x = random_matrix(32, 150, rng);
    const DenseMatrix out = forward(net, val_x);
    std::vector<std::size_t> labels(out.cols());
    for (std::size_t j = 0; j < out.cols(); ++j)
        labels[j] = argmax_column(out, j);
    return {std::move(net), std::move(train), LabeledBatch(std::move(val_x), std::move(labels))};
}

SearchConfig config(double drop)
{
    SearchConfig cfg;
    cfg.schedule_a = {16, 8, 4, 2};
    cfg.schedule_b = {16, 8, 4, 2};
    cfg.max_drop = drop;
    cfg.ridge = RidgeConfig::fixed(0.0);
    return cfg;
}

} // namespace

TEST(Search, UnlimitedDropReachesScheduleMinima)
{
    const auto t = tiny_task(1);
    const auto a = extract_activations(t.net, t.train, 0), b = extract_activations(t.net, t.train, 1);
    const auto trace = joint_rank_search(t.net, 0, 1, t.val, a, b, config(1.0));
    EXPECT_EQ(trace.final_rank_a, 2u);
    EXPECT_EQ(trace.final_rank_b, 2u);
    EXPECT_EQ(trace.steps.size(), 6u);
    EXPECT_EQ(trace.stop_reason, "schedules exhausted");
    EXPECT_EQ(trace.baseline_accuracy, 1.0);
}

TEST(Search, ZeroDropStopsImmediatelyWhenEveryStepDegrades)
{
    const auto t = tiny_task(2);
    const auto a = extract_activations(t.net, t.train, 0), b = extract_activations(t.net, t.train, 1);
    auto cfg = config(0.0);
    cfg.schedule_a = {16, 1};
    cfg.schedule_b = {16, 1};
    const auto trace = joint_rank_search(t.net, 0, 1, t.val, a, b, cfg);
    EXPECT_TRUE(trace.steps.empty());
    EXPECT_EQ(trace.final_rank_a, 16u);
    EXPECT_EQ(trace.final_rank_b, 16u);
    EXPECT_EQ(trace.stop_reason, "accuracy drop exceeded");
}

class SearchReplay : public ::testing::TestWithParam<std::tuple<int, double, Method>> {};

TEST_P(SearchReplay, MatchesGreedyReplayOracle)
{
    const auto [seed, drop, method] = GetParam();
    const auto t = tiny_task(100 + seed);
    const auto a = extract_activations(t.net, t.train, 0), b = extract_activations(t.net, t.train, 1);
    auto cfg = config(drop);
    cfg.method = method;
    const auto trace = joint_rank_search(t.net, 0, 1, t.val, a, b, cfg);
    const auto ref = replay_search(t.net, 0, 1, t.val, a, b, cfg.schedule_a, cfg.schedule_b, drop, method, cfg.ridge);

    EXPECT_EQ(trace.baseline_accuracy, ref.baseline);
    ASSERT_EQ(trace.steps.size(), ref.steps.size());
    for (std::size_t i = 0; i < ref.steps.size(); ++i) {
        EXPECT_EQ(trace.steps[i].layer == SearchLayer::A, ref.steps[i].took_a) << "step " << i;
        EXPECT_EQ(trace.steps[i].rank_a, ref.steps[i].rank_a);
        EXPECT_EQ(trace.steps[i].rank_b, ref.steps[i].rank_b);
        EXPECT_EQ(trace.steps[i].accuracy, ref.steps[i].accuracy);
    }
    EXPECT_EQ(trace.final_rank_a, ref.rank_a);
    EXPECT_EQ(trace.final_rank_b, ref.rank_b);
    EXPECT_GE(trace.final_accuracy, trace.baseline_accuracy - drop);
    EXPECT_DOUBLE_EQ(trace.fraction_a, parameter_fraction(16, 32, trace.final_rank_a));
    EXPECT_DOUBLE_EQ(trace.reduction_b, 1.0 - parameter_fraction(16, 16, trace.final_rank_b));
    const double total = 1.0 - (trace.fraction_a * 512 + trace.fraction_b * 256) / 768.0;
    EXPECT_DOUBLE_EQ(trace.reduction_total, total);
}

INSTANTIATE_TEST_SUITE_P(Seeded, SearchReplay,
                         ::testing::Combine(::testing::Range(0, 4), ::testing::Values(0.02, 0.1, 0.3),
                                            ::testing::Values(Method::Dalr, Method::Svd)));

TEST(Search, CompressTwoReproducesFinalAccuracy)
{
    const auto t = tiny_task(3);
    const auto a = extract_activations(t.net, t.train, 0), b = extract_activations(t.net, t.train, 1);
    const auto cfg = config(0.1);
    const auto trace = joint_rank_search(t.net, 0, 1, t.val, a, b, cfg);
    const Network final = compress_two(t.net, 0, trace.final_rank_a, 1, trace.final_rank_b, a, b, cfg.method,
                                       cfg.ridge);
    EXPECT_EQ(accuracy(final, t.val), trace.final_accuracy);
    EXPECT_EQ(final.splices().size(), 2u);
}

TEST(Search, RelativeDropAndReextractionRun)
{
    const auto t = tiny_task(4);
    const auto a = extract_activations(t.net, t.train, 0), b = extract_activations(t.net, t.train, 1);
    auto cfg = config(0.05);
    cfg.relative_to_previous = true;
    const auto rel = joint_rank_search(t.net, 0, 1, t.val, a, b, cfg);
    double prev = rel.initial_accuracy;
    for (const auto& s : rel.steps) {
        EXPECT_GE(s.accuracy, prev - 0.05);
        prev = s.accuracy;
    }
    cfg.relative_to_previous = false;
    cfg.reextract_activations = true;
    EXPECT_THROW(joint_rank_search(t.net, 0, 1, t.val, a, b, cfg), UsageError);
    const auto re = joint_rank_search(t.net, 0, 1, t.val, a, b, cfg, &t.train);
    EXPECT_GE(re.final_accuracy, re.baseline_accuracy - 0.05);
}

TEST(Search, RejectsBadArguments)
{
    const auto t = tiny_task(5);
    const auto a = extract_activations(t.net, t.train, 0), b = extract_activations(t.net, t.train, 1);
    auto cfg = config(0.1);
    EXPECT_THROW(joint_rank_search(t.net, 0, 0, t.val, a, a, cfg), UsageError);
    EXPECT_THROW(joint_rank_search(t.net, 0, 7, t.val, a, b, cfg), RangeError);
    EXPECT_THROW(joint_rank_search(t.net, 0, 1, t.val, b, a, cfg), DimensionError);
    cfg.schedule_a = {8, 16};
    EXPECT_THROW(joint_rank_search(t.net, 0, 1, t.val, a, b, cfg), UsageError);
    cfg.schedule_a = {17};
    EXPECT_THROW(joint_rank_search(t.net, 0, 1, t.val, a, b, cfg), RankError);
    cfg = config(-0.1);
    EXPECT_THROW(joint_rank_search(t.net, 0, 1, t.val, a, b, cfg), UsageError);
}
