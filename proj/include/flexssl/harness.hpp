#pragma once

#include "flexssl/baselines.hpp"
#include "flexssl/dataset.hpp"
#include "flexssl/game.hpp"

#include "json.hpp"

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace flexssl {

/// Invalid experiment description (CLI exit code 2).
class SpecError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Everything that determines an experiment's outputs.
struct ExperimentSpec {
    std::string dataset = "two-moons";  // two-moons | tabular
    std::size_t n = 1000;
    double noise_sigma = 0.2;
    std::size_t features = 5;           // tabular only
    double missing_rate = 0.5;
    double noise_rate = 0.0;
    std::vector<std::string> methods{"flexssl"};
    GameConfig game;
    double tau = 0.95;
    std::vector<std::uint64_t> seeds{0};
    std::string out = "out";
    bool no_timing = false;
    std::string axis;                   // sweep: missing_rate | alpha
    std::vector<double> values;         // sweep points
    std::vector<std::size_t> snapshots; // dump-discriminator epochs
    std::size_t jobs = 0;               // worker threads; 0 = hardware concurrency
    ModelConfig model;

    void validate() const;
};

nlohmann::json to_json(const ExperimentSpec& spec);
/// Applies the keys present in `j` on top of `base`; unknown keys are rejected.
ExperimentSpec apply_spec_json(ExperimentSpec base, const nlohmann::json& j);
/// "0,1,2" or "0-4" or a mix of both.
std::vector<std::uint64_t> parse_seed_list(const std::string& s);

struct RunDatasets {
    SemiDataset train;
    SemiDataset test;
};

/// Train and test sets for one seed: generate, hide labels, corrupt labels.
RunDatasets make_datasets(const ExperimentSpec& spec, std::uint64_t seed);

/// One (method, seed, sweep value) run.
struct ArmResult {
    std::string method;
    std::uint64_t seed = 0;
    std::optional<double> axis_value;
    RunResult run;
    SemiDataset train;

    double final_test_metric() const;
};

/// Supplies a per-run observer for FlexSSL arms; `slot` is the run's index in
/// the result vector. Called on worker threads.
using ObserverFactory = std::function<GameObserver(std::size_t slot, std::uint64_t seed)>;

/// Runs every method × seed of `spec` (× every sweep value when spec.axis is
/// set) on a bounded worker pool. Results come back in spec order: value,
/// then method, then seed, whatever the completion order.
std::vector<ArmResult> run_arms(const ExperimentSpec& spec, const ObserverFactory& observers = {});

struct MethodSummary {
    std::string method;
    std::vector<double> finals;  // final test metric per seed
    double mean = 0.0;
    double std = 0.0;
    bool win = false;
};

/// Per-method mean/std of the final test metric. The win flag marks the best
/// mean (highest accuracy or lowest MSE); ties all win.
std::vector<MethodSummary> summarize(const std::vector<ArmResult>& arms, const std::vector<std::string>& methods,
                                     bool higher_is_better);
nlohmann::json summary_json(const std::vector<MethodSummary>& rows, bool higher_is_better);

/// Fixed column order: run_id,method,seed,epoch,loss_A,loss_B,test_metric,
/// pseudo_acc,mean_p_labeled,mean_p_unlabeled,auc_p_mask,wall_ms. Sweep files
/// prepend axis,value.
void write_metrics_csv(std::ostream& out, const std::vector<ArmResult>& arms, bool timing, const std::string& axis = {});

/// 20 uniform bins on [0, 1]; p = 1 lands in the last bin.
std::vector<std::size_t> histogram20(std::span<const double> p);

struct TrainOutput {
    std::vector<ArmResult> arms;
};
struct CompareOutput {
    std::vector<ArmResult> arms;
    std::vector<MethodSummary> summary;
};
struct SweepOutput {
    std::vector<double> values;
    std::vector<ArmResult> arms;
    std::vector<std::vector<MethodSummary>> summary;  // per value
};
struct Snapshot {
    std::uint64_t seed = 0;
    std::size_t epoch = 0;
    std::vector<double> p;
    std::vector<std::size_t> counts;
};
struct DumpOutput {
    std::vector<Snapshot> snapshots;
    std::vector<ArmResult> arms;
};

/// Writes <out>/metrics.csv and <out>/model_<method>_seed<s>.json.
TrainOutput cmd_train(const ExperimentSpec& spec);
/// Writes <out>/metrics.csv and <out>/summary.json.
CompareOutput cmd_compare(const ExperimentSpec& spec);
/// Writes <out>/sweep.csv and <out>/summary.json.
SweepOutput cmd_sweep(const ExperimentSpec& spec);
/// Writes <out>/p_seed<s>_epoch<e>.csv, <out>/histograms.json and <out>/metrics.csv.
DumpOutput cmd_dump_discriminator(const ExperimentSpec& spec);

}  // namespace flexssl
