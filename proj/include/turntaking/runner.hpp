#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "turntaking/config.hpp"
#include "turntaking/corpus.hpp"
#include "turntaking/metrics.hpp"
#include "turntaking/network.hpp"

namespace turntaking::run {

struct ModalitySetting {
    std::string name;
    bool words = false;
    std::string source;
    net::Timescale timescale = net::Timescale::regular(50);
    std::size_t subnet_hidden = 0;
    std::size_t embed_dim = 64;
};

struct Experiment {
    cfg::ConfigFile file;

    std::string data_dir;

    corpus::GeneratorConfig generator;
    int n_train = 8;
    int n_test = 2;
    std::uint64_t generator_seed = 1;

    net::Arrangement arrangement = net::Arrangement::TwoSubnets;
    std::size_t master_hidden = 32;
    double dropout = 0.0;
    double l2 = 0.0;
    bool budget_check = true;
    std::vector<ModalitySetting> modalities;

    std::size_t epochs = 1;
    long long t_bptt = 100;
    double learning_rate = 1e-3;
    std::vector<std::uint64_t> seeds = {1};

    std::vector<std::vector<std::size_t>> grid_hidden;
    std::vector<double> grid_dropout;
    std::vector<double> grid_l2;

    std::string eval_checkpoint;
    std::string compare_baseline;
    std::string compare_candidate;

    static Experiment load(const std::string& path);
    static Experiment from_config(const cfg::ConfigFile& file);
};

struct SeedMetrics {
    std::uint64_t seed = 0;
    double bce = 0.0;
    double f1_pause50 = 0.0;
    double f1_pause500 = 0.0;
    double f1_onset = 0.0;
    double onset_threshold = 0.5;
};

// Event inventory of a test evaluation; the majority baselines are properties
// of the ground truth, identical for every seed.
struct EvalCounts {
    std::size_t pauses50 = 0;
    std::size_t pauses500 = 0;
    std::size_t onsets = 0;
    double majority50 = 0.0;
    double majority500 = 0.0;
    double majority_onset = 0.0;
};

struct TrainOutcome {
    std::vector<SeedMetrics> per_seed;
    SeedMetrics mean;
    std::size_t best_index = 0;
    EvalCounts counts;
    std::vector<double> best_epoch_loss;
};

// Synthesizes a corpus directory (manifest, vocabulary, conversations).
void generate_corpus(const Experiment& exp, const std::string& out_dir, std::uint64_t seed);

// Trains one model per seed on the full training split, evaluates each on the
// test split, writes report.csv/report.txt and the best seed's checkpoint.
TrainOutcome train_and_evaluate(const Experiment& exp, const std::string& out_dir, int jobs);

// Restores a checkpoint and evaluates it on the test split.
SeedMetrics evaluate_checkpoint(const Experiment& exp, const std::string& checkpoint_path,
                                const std::string& out_dir, EvalCounts* counts = nullptr);

struct GridPoint {
    std::vector<std::size_t> hidden;
    double dropout = 0.0;
    double l2 = 0.0;
    double dev_bce = 0.0;
    std::size_t n_params = 0;
};

struct GridOutcome {
    std::vector<GridPoint> points;
    std::size_t best_index = 0;
};

// Hold-out search: the last quarter of the training conversations is the
// development set; candidates train on the rest and are ranked by dev BCE,
// ties won by the smaller model. The test split is never touched.
GridOutcome grid_search(const Experiment& exp, const std::string& out_dir, int jobs);

struct CompareRow {
    std::string metric;
    double mean_a = 0.0;
    double mean_b = 0.0;
    double diff = 0.0;
    double p_value = 1.0;
};

// Per-metric Welch t-test between the per-seed rows of two train runs.
std::vector<CompareRow> compare_runs(const std::string& dir_a, const std::string& dir_b,
                                     const std::string& out_dir);

struct GradCase {
    std::string name;
    double max_rel_err = 0.0;
};

inline constexpr double kGradTolerance = 1e-4;

// Finite-difference verification of the full backward pass across every
// arrangement and clock mix.
std::vector<GradCase> gradient_suite();

// Exit codes: 0 success, 1 usage or data problems, 2 numeric failures,
// 3 gradient check failure.
int cmd_generate(const std::string& config_path, const std::string& out_dir,
                 const std::uint64_t* seed_override);
int cmd_train(const std::string& config_path, const std::string& out_dir,
              const std::uint64_t* seed_override, int jobs);
int cmd_gridsearch(const std::string& config_path, const std::string& out_dir, int jobs);
int cmd_evaluate(const std::string& config_path, const std::string& out_dir);
int cmd_gradcheck();
int cmd_compare(const std::string& config_path, const std::string& out_dir);

}  // namespace turntaking::run
