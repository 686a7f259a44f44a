#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>

#include "nael/error.hpp"
#include "nael/evaluation.hpp"
#include "nael/nn/checkpoint.hpp"

using namespace nael;
using namespace nael::evaluation;

namespace {

model::NaelNetworks random_networks(std::uint64_t seed)
{
    model::NaelNetworks nets;
    nn::Rng rng(seed);
    nets.prn.init(rng);
    nets.nan.init(rng);
    nets.arn.init(rng);
    return nets;
}

dataset::Dataset small_dataset(std::size_t per_class, std::uint64_t seed, double snr)
{
    dataset::DatasetSpec spec;
    spec.per_class = per_class;
    spec.seed = seed;
    spec.snr_low = spec.snr_high = snr;
    return dataset::generate_dataset(spec);
}

std::string temp_dir(const char* name)
{
    const auto p = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove_all(p);
    return p.string();
}

}  // namespace

TEST_CASE("confusion matrix bookkeeping")
{
    ConfusionMatrix perfect;
    for (int rep = 0; rep < 3; ++rep)
        for (int c = 0; c < 12; ++c) perfect.add(c, c);
    CHECK(perfect.pcc() == 100.0);
    CHECK(perfect.total() == 36);
    for (int c = 0; c < 12; ++c) {
        CHECK(perfect.column_sum(c) == 3);
        CHECK(perfect.class_accuracy(c) == 1.0);
    }

    ConfusionMatrix m;
    m.add(1, 0);  // predicted Costas, actually LFM
    m.add(0, 0);
    m.add(3, 6);
    CHECK(m.counts[1][0] == 1);
    CHECK(m.column_sum(0) == 2);
    CHECK(m.class_accuracy(0) == 0.5);
    CHECK(m.pcc() == doctest::Approx(100.0 / 3.0).epsilon(1e-15));
    CHECK(ConfusionMatrix{}.pcc() == 0.0);
    CHECK_THROWS_AS(m.add(12, 0), ParameterError);
    CHECK_THROWS_AS(m.add(0, -1), ParameterError);

    std::ostringstream out;
    m.write_csv(out);
    std::istringstream lines(out.str());
    std::string line;
    std::vector<std::string> rows;
    while (std::getline(lines, line)) rows.push_back(line);
    REQUIRE(rows.size() == 13);
    for (const auto& r : rows) CHECK(std::count(r.begin(), r.end(), ',') == 12);
    CHECK(rows[0].rfind("predicted\\actual,LFM,Costas,", 0) == 0);
    CHECK(rows[2] == "Costas,1,0,0,0,0,0,0,0,0,0,0,0");
}

TEST_CASE("SNR estimate from power subtraction")
{
    CHECK(estimate_snr(2.0, 1.0) == 0.0);
    CHECK(estimate_snr(1.01, 1.0) == doctest::Approx(-20.0).epsilon(1e-12));
    CHECK(estimate_snr(11.0, 1.0) == doctest::Approx(10.0).epsilon(1e-14));
    CHECK_THROWS_AS(estimate_snr(1.0, 1.0), NumericError);
    CHECK_THROWS_AS(estimate_snr(0.5, 1.0), NumericError);
    CHECK_THROWS_AS(estimate_snr(1.0, 0.0), ParameterError);
}

TEST_CASE("monotone response check")
{
    const std::vector<double> down{0.9, 0.7, 0.5, 0.2, 0.1};
    CHECK(non_increasing_within(down, 0.02, 1));
    const std::vector<double> one_small{0.9, 0.7, 0.71, 0.2, 0.1};
    CHECK(non_increasing_within(one_small, 0.02, 1));
    CHECK_FALSE(non_increasing_within(one_small, 0.02, 0));
    const std::vector<double> big{0.9, 0.7, 0.75, 0.2, 0.1};
    CHECK_FALSE(non_increasing_within(big, 0.02, 1));
    const std::vector<double> two{0.9, 0.91, 0.7, 0.71, 0.1};
    CHECK_FALSE(non_increasing_within(two, 0.02, 1));
}

TEST_CASE("standalone ARN cost adds the reused PRN prefix")
{
    const model::NaelNetworks nets;
    // SC 589,824; stage 0: first block 2,097,152 + 294,912 + 786,432, repeat
    // 1,179,648 + 442,368 + 1,179,648; ARN 39,063,552.
    CHECK(standalone_arn_flops(nets) == 589824ULL + 3178496ULL + 2801664ULL + 39063552ULL);
}

TEST_CASE("evaluation aggregates and obeys the cost identity")
{
    const model::NaelNetworks nets = random_networks(11);
    const dataset::Dataset data = small_dataset(3, 5, -4.0);
    const model::CostModel cost = model::cost_model(nets);

    const ScenarioReport r = evaluate(nets, data, -4.0, model::Routing::nan, 10);
    CHECK(r.samples == 36);
    CHECK(r.confusion.total() == 36);
    for (int c = 0; c < 12; ++c) CHECK(r.confusion.column_sum(c) == 3);
    CHECK(r.pcc == doctest::Approx(100.0 * static_cast<double>(r.confusion.trace()) / 36.0).epsilon(1e-15));
    CHECK((r.arn_rate >= 0.0 && r.arn_rate <= 1.0));
    CHECK(r.arn_rate == static_cast<double>(r.arn_activations) / 36.0);
    const double identity = (static_cast<double>(cost.base) + r.arn_rate * static_cast<double>(cost.marginal)) / 1e6;
    CHECK(std::abs(r.mean_mflops - identity) <= 1e-12 * identity);
    CHECK(r.prn_correct + r.prn_wrong == 36);
    CHECK(r.prn_correct_center <= r.prn_correct);
    CHECK(r.prn_wrong_center <= r.prn_wrong);

    const ScenarioReport reliable = evaluate(nets, data, -4.0, model::Routing::always_reliable);
    CHECK(reliable.arn_rate == 0.0);
    CHECK(reliable.mean_mflops == static_cast<double>(cost.base) / 1e6);
    CHECK(reliable.pcc == reliable.prn_pcc);
    const ScenarioReport unreliable = evaluate(nets, data, -4.0, model::Routing::always_unreliable);
    CHECK(unreliable.arn_rate == 1.0);
    CHECK(unreliable.pcc == unreliable.arn_pcc);
    CHECK(unreliable.mean_mflops == static_cast<double>(cost.base + cost.marginal) / 1e6);

    // Chunking does not change the outcome.
    const ScenarioReport again = evaluate(nets, data, -4.0, model::Routing::nan, 7);
    CHECK(again.confusion.counts == r.confusion.counts);
    CHECK(again.mean_mflops == r.mean_mflops);

    dataset::Dataset wrong = data;
    wrong.height = 64;
    CHECK_THROWS_AS(evaluate(nets, wrong), CompatibilityError);
}

TEST_CASE("scenario suite and summary CSV")
{
    const model::NaelNetworks nets = random_networks(12);
    SuiteSpec suite;
    suite.snrs = {0.0, -10.0};
    suite.per_class = 1;
    const auto reports = scenario_suite(nets, suite);
    REQUIRE(reports.size() == 2);
    CHECK(reports[0].snr_db == 0.0);
    CHECK(reports[1].samples == 12);
    CHECK(scenario_dataset_spec(suite, 0).seed != scenario_dataset_spec(suite, 1).seed);

    std::ostringstream a, b;
    write_summary_csv(a, reports);
    write_summary_csv(b, scenario_suite(nets, suite));
    CHECK(a.str() == b.str());
    CHECK(a.str().rfind("snr_db,pcc,mean_mflops,arn_rate\n0,", 0) == 0);
}

TEST_CASE("network checkpoints round trip through a directory")
{
    model::NaelNetworks nets = random_networks(13);
    const std::string dir = temp_dir("nael_eval_ckpt");
    CHECK_THROWS_AS(load_networks(dir), DependencyError);
    save_networks(dir, nets);
    model::NaelNetworks loaded = load_networks(dir);
    std::ostringstream x, y;
    nn::write_checkpoint(x, nn::snapshot(nets.arn.registry()));
    nn::write_checkpoint(y, nn::snapshot(loaded.arn.registry()));
    CHECK(x.str() == y.str());

    model::NetworkConfig other;
    other.prn_ce_channels = 128;
    CHECK_THROWS_AS(load_networks(dir, other), CompatibilityError);

    std::filesystem::remove(checkpoint_path(dir, "nan"));
    try {
        load_networks(dir);
        FAIL("expected a dependency error");
    } catch (const DependencyError& e) {
        CHECK(std::string(e.what()).find("nan") != std::string::npos);
    }
    std::filesystem::remove_all(dir);
}
