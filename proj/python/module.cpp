#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>

#include "turntaking/runner.hpp"

namespace py = pybind11;
using namespace turntaking;

namespace {

py::dict metrics_dict(const run::SeedMetrics& m) {
    py::dict d;
    d["seed"] = m.seed;
    d["bce"] = m.bce;
    d["f1_pause_50ms"] = m.f1_pause50;
    d["f1_pause_500ms"] = m.f1_pause500;
    d["f1_onset"] = m.f1_onset;
    d["onset_threshold"] = m.onset_threshold;
    return d;
}

py::dict counts_dict(const run::EvalCounts& c) {
    py::dict d;
    d["pauses_50ms"] = c.pauses50;
    d["pauses_500ms"] = c.pauses500;
    d["onsets"] = c.onsets;
    d["majority_f1_50ms"] = c.majority50;
    d["majority_f1_500ms"] = c.majority500;
    d["majority_f1_onset"] = c.majority_onset;
    return d;
}

run::Experiment load_exp(const std::string& config_path) {
    return run::Experiment::load(config_path);
}

eval::FrameLabels as_labels(const std::vector<int>& a, const std::vector<int>& b) {
    return {a, b};
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Multiscale recurrent turn-taking prediction core";

    py::register_exception<ConfigError>(m, "ConfigurationError", PyExc_ValueError);
    py::register_exception<DataError>(m, "DataFormatError", PyExc_ValueError);
    py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

    m.attr("FRAME_MS") = net::kFrameMs;
    m.attr("HORIZON") = net::kHorizon;
    m.attr("HIDDEN_BUDGET") = net::kHiddenBudget;

    m.def(
        "generate",
        [](const std::string& config, const std::string& out_dir,
           std::optional<std::uint64_t> seed) {
            run::Experiment exp = load_exp(config);
            run::generate_corpus(exp, out_dir, seed.value_or(exp.generator_seed));
        },
        py::arg("config"), py::arg("out_dir"), py::arg("seed") = py::none(),
        py::call_guard<py::gil_scoped_release>(),
        "Synthesize a conversation corpus described by the config's [generator] section.");

    m.def(
        "train",
        [](const std::string& config, const std::string& out_dir,
           std::optional<std::uint64_t> seed, int jobs) {
            run::Experiment exp = load_exp(config);
            if (seed) exp.seeds = {*seed};
            run::TrainOutcome out;
            {
                py::gil_scoped_release release;
                out = run::train_and_evaluate(exp, out_dir, jobs);
            }
            py::list per_seed;
            for (const run::SeedMetrics& s : out.per_seed) per_seed.append(metrics_dict(s));
            py::dict d;
            d["per_seed"] = per_seed;
            d["mean"] = metrics_dict(out.mean);
            d["best_index"] = out.best_index;
            d["counts"] = counts_dict(out.counts);
            d["epoch_loss"] = out.best_epoch_loss;
            return d;
        },
        py::arg("config"), py::arg("out_dir"), py::arg("seed") = py::none(),
        py::arg("jobs") = 1,
        "Train one model per seed, evaluate on the test split, write report.csv "
        "and the best checkpoint under out_dir.");

    m.def(
        "evaluate",
        [](const std::string& config, const std::string& out_dir,
           std::optional<std::string> checkpoint) {
            run::Experiment exp = load_exp(config);
            std::string path = checkpoint.value_or(exp.eval_checkpoint);
            if (path.empty())
                throw ConfigError("no checkpoint given and the config has no [eval] checkpoint");
            run::EvalCounts counts;
            run::SeedMetrics metrics;
            {
                py::gil_scoped_release release;
                metrics = run::evaluate_checkpoint(exp, path, out_dir, &counts);
            }
            py::dict d = metrics_dict(metrics);
            d["counts"] = counts_dict(counts);
            return d;
        },
        py::arg("config"), py::arg("out_dir"), py::arg("checkpoint") = py::none(),
        "Restore a checkpoint and evaluate it on the config's test split.");

    m.def(
        "grid_search",
        [](const std::string& config, const std::string& out_dir, int jobs) {
            run::Experiment exp = load_exp(config);
            run::GridOutcome out;
            {
                py::gil_scoped_release release;
                out = run::grid_search(exp, out_dir, jobs);
            }
            py::list points;
            for (const run::GridPoint& p : out.points) {
                py::dict d;
                d["hidden"] = p.hidden;
                d["dropout"] = p.dropout;
                d["l2"] = p.l2;
                d["dev_bce"] = p.dev_bce;
                d["parameters"] = p.n_params;
                points.append(d);
            }
            py::dict d;
            d["points"] = points;
            d["best_index"] = out.best_index;
            return d;
        },
        py::arg("config"), py::arg("out_dir"), py::arg("jobs") = 1,
        "Hold-out search over hidden sizes, dropout and L2; writes grid.csv and best.ini.");

    m.def(
        "compare",
        [](const std::string& baseline_dir, const std::string& candidate_dir,
           const std::string& out_dir) {
            std::vector<run::CompareRow> rows;
            {
                py::gil_scoped_release release;
                rows = run::compare_runs(baseline_dir, candidate_dir, out_dir);
            }
            py::list out;
            for (const run::CompareRow& r : rows) {
                py::dict d;
                d["metric"] = r.metric;
                d["baseline_mean"] = r.mean_a;
                d["candidate_mean"] = r.mean_b;
                d["diff"] = r.diff;
                d["p_value"] = r.p_value;
                out.append(d);
            }
            return out;
        },
        py::arg("baseline_dir"), py::arg("candidate_dir"), py::arg("out_dir"),
        "Welch t-test per metric between the per-seed rows of two train runs.");

    m.def(
        "gradient_check",
        []() {
            std::vector<run::GradCase> cases;
            {
                py::gil_scoped_release release;
                cases = run::gradient_suite();
            }
            py::list out;
            for (const run::GradCase& c : cases) {
                py::dict d;
                d["name"] = c.name;
                d["max_rel_err"] = c.max_rel_err;
                d["pass"] = c.max_rel_err < run::kGradTolerance;
                out.append(d);
            }
            return out;
        },
        "Finite-difference verification of the backward pass; one entry per case.");

    m.def(
        "welch_ttest",
        [](const std::vector<double>& a, const std::vector<double>& b) {
            return eval::ttest_two_tailed(a, b);
        },
        py::arg("a"), py::arg("b"),
        "Two-tailed Welch t-test p-value for two independent samples.");

    m.def(
        "weighted_f1",
        [](const std::vector<std::array<int, 2>>& truth_pred) {
            return eval::fscore(truth_pred).weighted_f1;
        },
        py::arg("truth_pred"),
        "Prevalence-weighted F1 over binary (truth, prediction) pairs.");

    m.def(
        "majority_f1",
        [](const std::vector<int>& truth) { return eval::majority_baseline(truth).weighted_f1; },
        py::arg("truth"),
        "Weighted F1 of the always-majority predictor on binary labels.");

    m.def(
        "find_pauses",
        [](const std::vector<int>& speaker_a, const std::vector<int>& speaker_b,
           long long min_len_frames) {
            py::list out;
            for (const eval::PauseEvent& ev :
                 eval::find_pauses(as_labels(speaker_a, speaker_b), min_len_frames)) {
                py::dict d;
                d["decision_frame"] = ev.decision_frame;
                d["holder"] = ev.holder;
                d["continuer"] = ev.continuer;
                d["is_shift"] = ev.truth() == eval::kShift;
                out.append(d);
            }
            return out;
        },
        py::arg("speaker_a"), py::arg("speaker_b"), py::arg("min_len_frames") = 1,
        "Scorable pause events from two binary activity tracks (50ms frames).");

    m.def(
        "find_onsets",
        [](const std::vector<int>& speaker_a, const std::vector<int>& speaker_b) {
            py::list out;
            for (const eval::OnsetEvent& ev : eval::find_onsets(as_labels(speaker_a, speaker_b))) {
                py::dict d;
                d["onset_frame"] = ev.onset_frame;
                d["length_frames"] = ev.length_frames;
                d["speaker"] = ev.speaker;
                d["is_long"] = ev.is_long;
                out.append(d);
            }
            return out;
        },
        py::arg("speaker_a"), py::arg("speaker_b"),
        "Scorable SHORT/LONG utterance onsets from two binary activity tracks.");
}
