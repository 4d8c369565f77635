#include "turntaking/runner.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <chrono>
#include <thread>

namespace turntaking::run {

namespace fs = std::filesystem;

namespace {

std::string fmt6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
    std::size_t workers = std::min(n, static_cast<std::size_t>(std::max(1, jobs)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::mutex err_mu;
    std::exception_ptr err;
    auto worker = [&] {
        while (true) {
            std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mu);
                if (!err) err = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    return out;
}

// Rows of already formatted cells to an aligned text table.
void write_aligned(const fs::path& path, const std::vector<std::vector<std::string>>& rows) {
    std::vector<std::size_t> width;
    for (const auto& row : rows) {
        if (width.size() < row.size()) width.resize(row.size(), 0);
        for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
    }
    std::ofstream out = open_out(path);
    for (const auto& row : rows) {
        std::string line;
        for (std::size_t c = 0; c < row.size(); ++c) {
            std::string cell = row[c];
            cell.resize(width[c], ' ');
            if (c) line += "  ";
            line += cell;
        }
        while (!line.empty() && line.back() == ' ') line.pop_back();
        out << line << "\n";
    }
    if (!out) throw DataError("write failed: " + path.string());
}

}  // namespace

Experiment Experiment::from_config(const cfg::ConfigFile& file) {
    Experiment e;
    e.file = file;
    e.data_dir = file.get_or("data", "dir", "");

    corpus::GeneratorConfig& g = e.generator;
    g.duration_s = file.get_double_or("generator", "duration_s", g.duration_s);
    g.turn_mean_s = file.get_double_or("generator", "turn_mean_s", g.turn_mean_s);
    g.turn_min_s = file.get_double_or("generator", "turn_min_s", g.turn_min_s);
    g.turn_max_s = file.get_double_or("generator", "turn_max_s", g.turn_max_s);
    g.gap_mean_s = file.get_double_or("generator", "gap_mean_s", g.gap_mean_s);
    g.gap_min_s = file.get_double_or("generator", "gap_min_s", g.gap_min_s);
    g.gap_max_s = file.get_double_or("generator", "gap_max_s", g.gap_max_s);
    g.overlap_prob = file.get_double_or("generator", "overlap_prob", g.overlap_prob);
    g.p_cue = file.get_double_or("generator", "p_cue", g.p_cue);
    g.p_shift_cue = file.get_double_or("generator", "p_shift_cue", g.p_shift_cue);
    g.p_shift_nocue = file.get_double_or("generator", "p_shift_nocue", g.p_shift_nocue);
    g.backchannel_prob = file.get_double_or("generator", "backchannel_prob", g.backchannel_prob);
    g.vocab_fillers = static_cast<int>(file.get_int_or("generator", "vocab_fillers",
                                                       g.vocab_fillers));
    g.gaze = file.get_bool_or("generator", "gaze", g.gaze);
    g.noise = file.get_double_or("generator", "noise", g.noise);
    e.n_train = static_cast<int>(file.get_int_or("generator", "n_train", e.n_train));
    e.n_test = static_cast<int>(file.get_int_or("generator", "n_test", e.n_test));
    e.generator_seed = static_cast<std::uint64_t>(
        file.get_int_or("generator", "seed", static_cast<long long>(e.generator_seed)));

    if (file.has_section("network")) {
        e.arrangement = net::arrangement_from_string(file.get("network", "arrangement"));
        long long mh = file.get_int("network", "master_hidden");
        if (mh < 1) throw ConfigError("[network] master_hidden must be positive");
        e.master_hidden = static_cast<std::size_t>(mh);
        e.dropout = file.get_double_or("network", "dropout", e.dropout);
        e.l2 = file.get_double_or("network", "l2", e.l2);
        e.budget_check = file.get_bool_or("network", "budget_check", e.budget_check);
    }

    for (const std::string& section : file.sections_with_prefix("modality.")) {
        ModalitySetting m;
        m.name = section.substr(9);
        if (m.name.empty()) throw ConfigError("empty modality name in [" + section + "]");
        std::string kind = file.get_or(section, "kind", "features");
        if (kind == "words")
            m.words = true;
        else if (kind != "features")
            throw ConfigError("[" + section + "] kind must be features or words");
        m.source = file.get_or(section, "source", m.name);
        std::string clock = file.get_or(section, "clock", "50");
        if (clock == "async") {
            m.timescale = net::Timescale::asynchronous();
        } else {
            long long p = cfg::parse_int_value(clock, "[" + section + "] clock");
            m.timescale = net::Timescale::regular(p);
        }
        long long sh = file.get_int_or(section, "subnet_hidden", 0);
        if (sh < 0) throw ConfigError("[" + section + "] subnet_hidden must be non-negative");
        m.subnet_hidden = static_cast<std::size_t>(sh);
        long long ed = file.get_int_or(section, "embed_dim", 64);
        if (ed < 1) throw ConfigError("[" + section + "] embed_dim must be positive");
        m.embed_dim = static_cast<std::size_t>(ed);
        e.modalities.push_back(std::move(m));
    }

    e.epochs = static_cast<std::size_t>(file.get_int_or("training", "epochs", 1));
    e.t_bptt = file.get_int_or("training", "t_bptt", 100);
    e.learning_rate = file.get_double_or("training", "learning_rate", 1e-3);
    std::vector<std::string> seed_list = file.get_list("training", "seeds");
    if (!seed_list.empty()) {
        e.seeds.clear();
        for (const std::string& s : seed_list)
            e.seeds.push_back(static_cast<std::uint64_t>(
                cfg::parse_int_value(s, "[training] seeds")));
    }

    for (const std::string& item : file.get_list("grid", "hidden")) {
        std::vector<std::size_t> part;
        std::size_t pos = 0;
        while (pos <= item.size()) {
            std::size_t colon = item.find(':', pos);
            std::string tok =
                colon == std::string::npos ? item.substr(pos) : item.substr(pos, colon - pos);
            long long v = cfg::parse_int_value(tok, "[grid] hidden");
            if (v < 1) throw ConfigError("[grid] hidden sizes must be positive");
            part.push_back(static_cast<std::size_t>(v));
            if (colon == std::string::npos) break;
            pos = colon + 1;
        }
        e.grid_hidden.push_back(std::move(part));
    }
    for (const std::string& item : file.get_list("grid", "dropout"))
        e.grid_dropout.push_back(cfg::parse_double_value(item, "[grid] dropout"));
    for (const std::string& item : file.get_list("grid", "l2"))
        e.grid_l2.push_back(cfg::parse_double_value(item, "[grid] l2"));

    e.eval_checkpoint = file.get_or("eval", "checkpoint", "");
    e.compare_baseline = file.get_or("compare", "baseline", "");
    e.compare_candidate = file.get_or("compare", "candidate", "");
    return e;
}

Experiment Experiment::load(const std::string& path) {
    return from_config(cfg::ConfigFile::parse_file(path));
}

namespace {

std::vector<corpus::ModalityPlan> make_plan(const Experiment& e) {
    if (e.modalities.empty()) throw ConfigError("config declares no [modality.*] sections");
    std::vector<corpus::ModalityPlan> plan;
    for (const ModalitySetting& m : e.modalities)
        plan.push_back({m.name, m.words, m.source, m.timescale});
    return plan;
}

net::NetworkConfig network_config(const Experiment& e, const corpus::Corpus& corp) {
    net::NetworkConfig nc;
    nc.arrangement = e.arrangement;
    nc.master_hidden = e.master_hidden;
    nc.dropout_p = e.dropout;
    nc.l2_lambda = e.l2;
    nc.hidden_budget_check = e.budget_check;
    for (const ModalitySetting& m : e.modalities) {
        net::ModalityConfig mc;
        mc.name = m.name;
        mc.timescale = m.timescale;
        mc.subnet_hidden = m.subnet_hidden;
        if (m.words) {
            mc.feature_dim = 2;  // target and interlocutor word slots
            mc.embed_vocab = corp.vocabulary.size();
            mc.embed_dim = m.embed_dim;
        } else {
            const corpus::FeatureStream* probe = nullptr;
            for (const corpus::Conversation& conv : corp.train)
                if ((probe = conv.find_stream(m.source, 0)) != nullptr) break;
            if (!probe)
                for (const corpus::Conversation& conv : corp.test)
                    if ((probe = conv.find_stream(m.source, 0)) != nullptr) break;
            if (!probe)
                throw DataError("no conversation provides the '" + m.source + "' stream");
            mc.feature_dim = 2 * probe->dim;
            mc.embed_vocab = 0;
            mc.embed_dim = 0;
        }
        nc.modalities.push_back(std::move(mc));
    }
    nc.validate();
    return nc;
}

struct ConversationEval {
    eval::PredictionTrack track;
    eval::FrameLabels labels;
    long long n_steps = 0;
    double bce_sum = 0.0;
    std::size_t frames = 0;
};

ConversationEval eval_conversation(const net::NetworkParams& params,
                                   const corpus::Conversation& conv,
                                   const std::vector<corpus::ModalityPlan>& plan,
                                   const corpus::Vocabulary& vocab) {
    std::vector<net::TrainSequence> seqs = corpus::build_dataset({conv}, plan, vocab);
    ConversationEval out;
    if (seqs.size() != 2) return out;
    for (int persp = 0; persp < 2; ++persp) {
        net::MultiscaleState state = net::make_state(params);
        std::vector<Vector> ys = net::run_sequence(params, seqs[persp].streams,
                                                   seqs[persp].n_steps(), false, nullptr,
                                                   nullptr, state);
        for (std::size_t k = 0; k < ys.size(); ++k) {
            out.bce_sum += nn::bce_loss(ys[k], seqs[persp].targets[k]).loss;
            ++out.frames;
        }
        out.track.speaker[persp] = std::move(ys);
    }
    out.labels = {corpus::frame_labels(conv.activity.speaker[0], conv.duration_s),
                  corpus::frame_labels(conv.activity.speaker[1], conv.duration_s)};
    out.n_steps = static_cast<long long>(seqs[0].n_steps());
    return out;
}

std::vector<std::pair<double, int>> onset_scores(const net::NetworkParams& params,
                                                 const std::vector<corpus::Conversation>& convs,
                                                 const std::vector<corpus::ModalityPlan>& plan,
                                                 const corpus::Vocabulary& vocab) {
    std::vector<std::pair<double, int>> out;
    for (const corpus::Conversation& conv : convs) {
        ConversationEval ce = eval_conversation(params, conv, plan, vocab);
        if (ce.n_steps == 0) continue;
        for (const eval::OnsetEvent& ev : eval::find_onsets(ce.labels)) {
            if (ev.onset_frame + eval::kOnsetPredictionOffset >= ce.n_steps) continue;
            out.emplace_back(eval::onset_score(ce.track, ev), ev.truth());
        }
    }
    return out;
}

struct ModelEval {
    SeedMetrics metrics;
    EvalCounts counts;
};

ModelEval evaluate_model(const net::NetworkParams& params,
                         const std::vector<corpus::Conversation>& convs,
                         const std::vector<corpus::ModalityPlan>& plan,
                         const corpus::Vocabulary& vocab, double onset_threshold) {
    double bce_sum = 0.0;
    std::size_t frames = 0;
    std::vector<std::array<int, 2>> pairs50, pairs500, pairs_onset;
    std::vector<int> truth50, truth500, truth_onset;

    for (const corpus::Conversation& conv : convs) {
        ConversationEval ce = eval_conversation(params, conv, plan, vocab);
        if (ce.n_steps == 0) continue;
        bce_sum += ce.bce_sum;
        frames += ce.frames;

        struct PauseBucket {
            long long min_len;
            std::vector<std::array<int, 2>>* pairs;
            std::vector<int>* truth;
        };
        for (const PauseBucket& bucket :
             {PauseBucket{1, &pairs50, &truth50}, PauseBucket{10, &pairs500, &truth500}}) {
            for (const eval::PauseEvent& ev : eval::find_pauses(ce.labels, bucket.min_len)) {
                if (ev.decision_frame >= ce.n_steps) continue;
                int continuer = eval::predict_pause(ce.track, ev);
                bucket.pairs->push_back(
                    {ev.truth(), continuer == ev.holder ? eval::kHold : eval::kShift});
                bucket.truth->push_back(ev.truth());
            }
        }
        for (const eval::OnsetEvent& ev : eval::find_onsets(ce.labels)) {
            if (ev.onset_frame + eval::kOnsetPredictionOffset >= ce.n_steps) continue;
            double score = eval::onset_score(ce.track, ev);
            pairs_onset.push_back({ev.truth(), score >= onset_threshold ? eval::kLong
                                                                        : eval::kShort});
            truth_onset.push_back(ev.truth());
        }
    }
    if (frames == 0) throw DataError("evaluation produced no frames");

    ModelEval out;
    out.metrics.bce = bce_sum / static_cast<double>(frames);
    out.metrics.onset_threshold = onset_threshold;
    out.metrics.f1_pause50 = pairs50.empty() ? 0.0 : eval::fscore(pairs50).weighted_f1;
    out.metrics.f1_pause500 = pairs500.empty() ? 0.0 : eval::fscore(pairs500).weighted_f1;
    out.metrics.f1_onset = pairs_onset.empty() ? 0.0 : eval::fscore(pairs_onset).weighted_f1;
    out.counts.pauses50 = pairs50.size();
    out.counts.pauses500 = pairs500.size();
    out.counts.onsets = pairs_onset.size();
    out.counts.majority50 =
        truth50.empty() ? 0.0 : eval::majority_baseline(truth50).weighted_f1;
    out.counts.majority500 =
        truth500.empty() ? 0.0 : eval::majority_baseline(truth500).weighted_f1;
    out.counts.majority_onset =
        truth_onset.empty() ? 0.0 : eval::majority_baseline(truth_onset).weighted_f1;
    return out;
}

std::vector<corpus::Conversation> dev_slice(const std::vector<corpus::Conversation>& train) {
    std::size_t n_dev = std::max<std::size_t>(1, train.size() / 4);
    if (n_dev >= train.size()) n_dev = train.size() > 1 ? train.size() - 1 : 1;
    return {train.end() - static_cast<long long>(n_dev), train.end()};
}

std::vector<corpus::Conversation> fit_slice(const std::vector<corpus::Conversation>& train) {
    std::size_t n_dev = std::max<std::size_t>(1, train.size() / 4);
    if (n_dev >= train.size()) return {};
    return {train.begin(), train.end() - static_cast<long long>(n_dev)};
}

double dataset_bce(const net::NetworkParams& params,
                   const std::vector<net::TrainSequence>& ds) {
    double sum = 0.0;
    std::size_t frames = 0;
    for (const net::TrainSequence& seq : ds) {
        net::MultiscaleState state = net::make_state(params);
        std::vector<Vector> ys =
            net::run_sequence(params, seq.streams, seq.n_steps(), false, nullptr, nullptr, state);
        for (std::size_t k = 0; k < ys.size(); ++k) {
            sum += nn::bce_loss(ys[k], seq.targets[k]).loss;
            ++frames;
        }
    }
    if (frames == 0) throw DataError("dataset produced no frames");
    return sum / static_cast<double>(frames);
}

const char* const kMetricHeader[4] = {"BCE loss", "f1 50ms", "f1 500ms", "f1 onset"};

void write_report(const fs::path& dir, const TrainOutcome& out) {
    std::ofstream csv = open_out(dir / "report.csv");
    csv << "run,bce_loss,f1_50ms,f1_500ms,f1_onset,best\n";
    std::vector<std::vector<std::string>> rows;
    rows.push_back({"run", kMetricHeader[0], kMetricHeader[1], kMetricHeader[2],
                    kMetricHeader[3], "best"});
    for (std::size_t i = 0; i < out.per_seed.size(); ++i) {
        const SeedMetrics& m = out.per_seed[i];
        std::string name = "seed_" + std::to_string(m.seed);
        std::string best = i == out.best_index ? "1" : "0";
        csv << name << "," << fmt6(m.bce) << "," << fmt6(m.f1_pause50) << ","
            << fmt6(m.f1_pause500) << "," << fmt6(m.f1_onset) << "," << best << "\n";
        rows.push_back({name, fmt6(m.bce), fmt6(m.f1_pause50), fmt6(m.f1_pause500),
                        fmt6(m.f1_onset), best});
    }
    csv << "mean," << fmt6(out.mean.bce) << "," << fmt6(out.mean.f1_pause50) << ","
        << fmt6(out.mean.f1_pause500) << "," << fmt6(out.mean.f1_onset) << ",\n";
    rows.push_back({"mean", fmt6(out.mean.bce), fmt6(out.mean.f1_pause50),
                    fmt6(out.mean.f1_pause500), fmt6(out.mean.f1_onset), ""});
    if (!csv) throw DataError("write failed: report.csv");
    csv.close();
    write_aligned(dir / "report.txt", rows);
}

}  // namespace

void generate_corpus(const Experiment& exp, const std::string& out_dir, std::uint64_t seed) {
    if (exp.n_train < 1) throw ConfigError("[generator] n_train must be at least 1");
    if (exp.n_test < 0) throw ConfigError("[generator] n_test must be non-negative");
    fs::create_directories(out_dir);

    std::vector<corpus::ManifestRow> manifest;
    std::vector<corpus::Conversation> train;
    char name[32];
    for (int i = 0; i < exp.n_train; ++i) {
        Rng rng(Rng::derive(seed, static_cast<std::uint64_t>(i)));
        corpus::Conversation conv = corpus::synth_generate(exp.generator, rng);
        std::snprintf(name, sizeof(name), "train_%03d", i);
        conv.id = name;
        corpus::save_conversation(out_dir, conv);
        manifest.push_back({"train", conv.id, conv.duration_s});
        train.push_back(std::move(conv));
    }
    for (int i = 0; i < exp.n_test; ++i) {
        Rng rng(Rng::derive(seed, 1000000 + static_cast<std::uint64_t>(i)));
        corpus::Conversation conv = corpus::synth_generate(exp.generator, rng);
        std::snprintf(name, sizeof(name), "test_%03d", i);
        conv.id = name;
        corpus::save_conversation(out_dir, conv);
        manifest.push_back({"test", conv.id, conv.duration_s});
    }
    corpus::write_manifest((fs::path(out_dir) / "manifest.csv").string(), manifest);
    std::vector<const corpus::Conversation*> refs;
    for (const corpus::Conversation& c : train) refs.push_back(&c);
    corpus::Vocabulary::build(refs).save((fs::path(out_dir) / "vocabulary.txt").string());
}

TrainOutcome train_and_evaluate(const Experiment& exp, const std::string& out_dir, int jobs) {
    if (exp.data_dir.empty()) throw ConfigError("config needs [data] dir");
    if (exp.seeds.empty()) throw ConfigError("[training] seeds is empty");
    corpus::Corpus corp = corpus::load_corpus(exp.data_dir);
    if (corp.test.empty()) throw DataError("corpus has no test conversations");
    std::vector<corpus::ModalityPlan> plan = make_plan(exp);
    net::NetworkConfig nc = network_config(exp, corp);

    corpus::DatasetReport report;
    std::vector<net::TrainSequence> train_ds =
        corpus::build_dataset(corp.train, plan, corp.vocabulary, &report);
    for (const std::string& w : report.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
    if (train_ds.empty()) throw DataError("training split is empty after filtering");
    std::vector<corpus::Conversation> dev = dev_slice(corp.train);

    struct RunOut {
        SeedMetrics metrics;
        EvalCounts counts;
        net::NetworkParams params;
        std::vector<double> epoch_loss;
        RunOut(SeedMetrics m, EvalCounts c, net::NetworkParams p, std::vector<double> el)
            : metrics(m), counts(c), params(std::move(p)), epoch_loss(std::move(el)) {}
    };
    std::vector<std::unique_ptr<RunOut>> runs(exp.seeds.size());

    parallel_for(exp.seeds.size(), jobs, [&](std::size_t i) {
        std::uint64_t seed = exp.seeds[i];
        net::NetworkParams params(nc);
        Rng weight_rng(Rng::derive(seed, 1));
        params.init_weights(weight_rng);
        net::TrainOptions topt;
        topt.epochs = exp.epochs;
        topt.t_bptt = exp.t_bptt;
        topt.learning_rate = exp.learning_rate;
        topt.seed = Rng::derive(seed, 2);
        net::TrainResult tr = net::train(params, train_ds, topt);

        std::vector<std::pair<double, int>> dev_scores =
            onset_scores(params, dev, plan, corp.vocabulary);
        double threshold = dev_scores.empty() ? 0.5 : eval::select_threshold(dev_scores);

        ModelEval ev = evaluate_model(params, corp.test, plan, corp.vocabulary, threshold);
        ev.metrics.seed = seed;
        runs[i] = std::make_unique<RunOut>(ev.metrics, ev.counts, std::move(params),
                                           std::move(tr.epoch_loss));
    });

    TrainOutcome out;
    for (std::size_t i = 0; i < runs.size(); ++i) {
        const SeedMetrics& m = runs[i]->metrics;
        out.per_seed.push_back(m);
        if (m.bce < runs[out.best_index]->metrics.bce) out.best_index = i;
    }
    SeedMetrics& mean = out.mean;
    for (const SeedMetrics& m : out.per_seed) {
        mean.bce += m.bce;
        mean.f1_pause50 += m.f1_pause50;
        mean.f1_pause500 += m.f1_pause500;
        mean.f1_onset += m.f1_onset;
        mean.onset_threshold += m.onset_threshold;
    }
    double inv = 1.0 / static_cast<double>(out.per_seed.size());
    mean.bce *= inv;
    mean.f1_pause50 *= inv;
    mean.f1_pause500 *= inv;
    mean.f1_onset *= inv;
    mean.onset_threshold *= inv;
    out.counts = runs[out.best_index]->counts;
    out.best_epoch_loss = runs[out.best_index]->epoch_loss;

    fs::create_directories(out_dir);
    write_report(out_dir, out);
    const RunOut& best = *runs[out.best_index];
    net::write_checkpoint((fs::path(out_dir) / "model.ckpt").string(), exp.file.echo(),
                          {{"onset_threshold", best.metrics.onset_threshold},
                           {"seed", static_cast<double>(best.metrics.seed)},
                           {"test_bce", best.metrics.bce}},
                          runs[out.best_index]->params);
    return out;
}

SeedMetrics evaluate_checkpoint(const Experiment& exp, const std::string& checkpoint_path,
                                const std::string& out_dir, EvalCounts* counts) {
    if (exp.data_dir.empty()) throw ConfigError("config needs [data] dir");
    corpus::Corpus corp = corpus::load_corpus(exp.data_dir);
    if (corp.test.empty()) throw DataError("corpus has no test conversations");
    std::vector<corpus::ModalityPlan> plan = make_plan(exp);
    net::NetworkConfig nc = network_config(exp, corp);
    net::NetworkParams params(nc);
    net::RawCheckpoint raw = net::read_checkpoint(checkpoint_path);
    net::apply_checkpoint(raw, params);
    double threshold = 0.5;
    std::uint64_t seed = 0;
    for (const auto& [name, value] : raw.scalars) {
        if (name == "onset_threshold") threshold = value;
        if (name == "seed") seed = static_cast<std::uint64_t>(value);
    }
    ModelEval ev = evaluate_model(params, corp.test, plan, corp.vocabulary, threshold);
    ev.metrics.seed = seed;
    if (counts) *counts = ev.counts;

    fs::create_directories(out_dir);
    std::ofstream csv = open_out(fs::path(out_dir) / "evaluate.csv");
    csv << "run,bce_loss,f1_50ms,f1_500ms,f1_onset\n";
    csv << "checkpoint," << fmt6(ev.metrics.bce) << "," << fmt6(ev.metrics.f1_pause50) << ","
        << fmt6(ev.metrics.f1_pause500) << "," << fmt6(ev.metrics.f1_onset) << "\n";
    if (!csv) throw DataError("write failed: evaluate.csv");
    csv.close();
    write_aligned(fs::path(out_dir) / "evaluate.txt",
                  {{"run", kMetricHeader[0], kMetricHeader[1], kMetricHeader[2], kMetricHeader[3]},
                   {"checkpoint", fmt6(ev.metrics.bce), fmt6(ev.metrics.f1_pause50),
                    fmt6(ev.metrics.f1_pause500), fmt6(ev.metrics.f1_onset)}});
    return ev.metrics;
}

namespace {

std::size_t partition_slots(const Experiment& exp) {
    switch (exp.arrangement) {
        case net::Arrangement::NoSubnets:
            return 1;
        case net::Arrangement::OneSubnet:
            return 2;
        case net::Arrangement::TwoSubnets: {
            std::size_t n = 1;
            for (const ModalitySetting& m : exp.modalities)
                if (m.subnet_hidden > 0) ++n;
            return n;
        }
    }
    throw ConfigError("unknown arrangement");
}

Experiment apply_candidate(const Experiment& base, const std::vector<std::size_t>& hidden,
                           double dropout, double l2) {
    Experiment e = base;
    e.master_hidden = hidden[0];
    e.dropout = dropout;
    e.l2 = l2;
    std::size_t next = 1;
    for (ModalitySetting& m : e.modalities) {
        if (base.arrangement == net::Arrangement::OneSubnet)
            m.subnet_hidden = hidden[1];
        else if (base.arrangement == net::Arrangement::TwoSubnets && m.subnet_hidden > 0)
            m.subnet_hidden = hidden[next++];
    }
    return e;
}

std::string join_partition(const std::vector<std::size_t>& hidden) {
    std::string out;
    for (std::size_t i = 0; i < hidden.size(); ++i) {
        if (i) out += ":";
        out += std::to_string(hidden[i]);
    }
    return out;
}

}  // namespace

GridOutcome grid_search(const Experiment& exp, const std::string& out_dir, int jobs) {
    if (exp.data_dir.empty()) throw ConfigError("config needs [data] dir");
    if (exp.seeds.empty()) throw ConfigError("[training] seeds is empty");
    corpus::Corpus corp = corpus::load_corpus(exp.data_dir);
    if (corp.train.size() < 2)
        throw DataError("grid search needs at least two training conversations");
    std::vector<corpus::ModalityPlan> plan = make_plan(exp);

    std::vector<corpus::Conversation> fit = fit_slice(corp.train);
    std::vector<corpus::Conversation> dev = dev_slice(corp.train);
    std::vector<net::TrainSequence> fit_ds = corpus::build_dataset(fit, plan, corp.vocabulary);
    std::vector<net::TrainSequence> dev_ds = corpus::build_dataset(dev, plan, corp.vocabulary);
    if (fit_ds.empty() || dev_ds.empty())
        throw DataError("grid split left an empty training or development set");

    std::size_t slots = partition_slots(exp);
    std::vector<std::vector<std::size_t>> hiddens = exp.grid_hidden;
    if (hiddens.empty()) {
        std::vector<std::size_t> current = {exp.master_hidden};
        for (const ModalitySetting& m : exp.modalities) {
            if (exp.arrangement == net::Arrangement::OneSubnet) {
                current.push_back(m.subnet_hidden);
                break;
            }
            if (exp.arrangement == net::Arrangement::TwoSubnets && m.subnet_hidden > 0)
                current.push_back(m.subnet_hidden);
        }
        hiddens.push_back(std::move(current));
    }
    for (const auto& h : hiddens)
        if (h.size() != slots)
            throw ConfigError("[grid] hidden partition " + join_partition(h) + " needs " +
                              std::to_string(slots) + " sizes for this arrangement");
    std::vector<double> drops = exp.grid_dropout.empty() ? std::vector<double>{exp.dropout}
                                                         : exp.grid_dropout;
    std::vector<double> l2s = exp.grid_l2.empty() ? std::vector<double>{exp.l2} : exp.grid_l2;

    GridOutcome out;
    for (const auto& h : hiddens)
        for (double dp : drops)
            for (double l2 : l2s) out.points.push_back({h, dp, l2, 0.0, 0});

    std::uint64_t seed = exp.seeds[0];
    parallel_for(out.points.size(), jobs, [&](std::size_t i) {
        GridPoint& pt = out.points[i];
        Experiment cand = apply_candidate(exp, pt.hidden, pt.dropout, pt.l2);
        net::NetworkConfig nc = network_config(cand, corp);
        net::NetworkParams params(nc);
        Rng weight_rng(Rng::derive(seed, 1));
        params.init_weights(weight_rng);
        net::TrainOptions topt;
        topt.epochs = exp.epochs;
        topt.t_bptt = exp.t_bptt;
        topt.learning_rate = exp.learning_rate;
        topt.seed = Rng::derive(seed, 2);
        net::train(params, fit_ds, topt);
        pt.dev_bce = dataset_bce(params, dev_ds);
        pt.n_params = params.n_parameters();
    });

    for (std::size_t i = 1; i < out.points.size(); ++i) {
        const GridPoint& a = out.points[i];
        const GridPoint& b = out.points[out.best_index];
        if (a.dev_bce < b.dev_bce ||
            (a.dev_bce == b.dev_bce && a.n_params < b.n_params))
            out.best_index = i;
    }

    fs::create_directories(out_dir);
    std::ofstream csv = open_out(fs::path(out_dir) / "grid.csv");
    csv << "hidden,dropout,l2,dev_bce,parameters,best\n";
    std::vector<std::vector<std::string>> rows;
    rows.push_back({"hidden", "dropout", "l2", "dev BCE", "parameters", "best"});
    for (std::size_t i = 0; i < out.points.size(); ++i) {
        const GridPoint& pt = out.points[i];
        std::string best = i == out.best_index ? "1" : "0";
        csv << join_partition(pt.hidden) << "," << fmt6(pt.dropout) << "," << fmt6(pt.l2) << ","
            << fmt6(pt.dev_bce) << "," << pt.n_params << "," << best << "\n";
        rows.push_back({join_partition(pt.hidden), fmt6(pt.dropout), fmt6(pt.l2),
                        fmt6(pt.dev_bce), std::to_string(pt.n_params), best});
    }
    if (!csv) throw DataError("write failed: grid.csv");
    csv.close();
    write_aligned(fs::path(out_dir) / "grid.txt", rows);

    const GridPoint& best = out.points[out.best_index];
    cfg::ConfigFile tuned = exp.file;
    tuned.set("network", "master_hidden", std::to_string(best.hidden[0]));
    tuned.set("network", "dropout", fmt6(best.dropout));
    tuned.set("network", "l2", fmt6(best.l2));
    std::size_t next = 1;
    for (const ModalitySetting& m : exp.modalities) {
        if (exp.arrangement == net::Arrangement::OneSubnet)
            tuned.set("modality." + m.name, "subnet_hidden", std::to_string(best.hidden[1]));
        else if (exp.arrangement == net::Arrangement::TwoSubnets && m.subnet_hidden > 0)
            tuned.set("modality." + m.name, "subnet_hidden",
                      std::to_string(best.hidden[next++]));
    }
    std::ofstream ini = open_out(fs::path(out_dir) / "best.ini");
    ini << tuned.echo();
    if (!ini) throw DataError("write failed: best.ini");
    return out;
}

namespace {

std::vector<std::array<double, 4>> read_report_rows(const std::string& dir) {
    std::string path = (fs::path(dir) / "report.csv").string();
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    std::vector<std::array<double, 4>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind("seed_", 0) != 0) continue;
        std::array<double, 4> row{};
        std::size_t pos = line.find(',');
        for (int c = 0; c < 4; ++c) {
            std::size_t next = line.find(',', pos + 1);
            std::string tok = line.substr(pos + 1, next - pos - 1);
            row[c] = cfg::parse_double_value(tok, path);
            pos = next;
        }
        rows.push_back(row);
    }
    if (rows.size() < 2) throw DataError(path + ": needs at least two per-seed rows");
    return rows;
}

}  // namespace

std::vector<CompareRow> compare_runs(const std::string& dir_a, const std::string& dir_b,
                                     const std::string& out_dir) {
    std::vector<std::array<double, 4>> rows_a = read_report_rows(dir_a);
    std::vector<std::array<double, 4>> rows_b = read_report_rows(dir_b);
    const char* names[4] = {"bce_loss", "f1_50ms", "f1_500ms", "f1_onset"};

    std::vector<CompareRow> out;
    for (int c = 0; c < 4; ++c) {
        std::vector<double> a, b;
        for (const auto& r : rows_a) a.push_back(r[c]);
        for (const auto& r : rows_b) b.push_back(r[c]);
        CompareRow row;
        row.metric = names[c];
        for (double v : a) row.mean_a += v;
        for (double v : b) row.mean_b += v;
        row.mean_a /= static_cast<double>(a.size());
        row.mean_b /= static_cast<double>(b.size());
        row.diff = row.mean_b - row.mean_a;
        row.p_value = eval::ttest_two_tailed(a, b);
        out.push_back(row);
    }

    fs::create_directories(out_dir);
    std::ofstream csv = open_out(fs::path(out_dir) / "compare.csv");
    csv << "metric,baseline,candidate,diff,p_value\n";
    std::vector<std::vector<std::string>> rows;
    rows.push_back({"metric", "baseline", "candidate", "diff", "p value"});
    for (const CompareRow& r : out) {
        csv << r.metric << "," << fmt6(r.mean_a) << "," << fmt6(r.mean_b) << "," << fmt6(r.diff)
            << "," << fmt6(r.p_value) << "\n";
        rows.push_back({r.metric, fmt6(r.mean_a), fmt6(r.mean_b), fmt6(r.diff),
                        fmt6(r.p_value)});
    }
    if (!csv) throw DataError("write failed: compare.csv");
    csv.close();
    write_aligned(fs::path(out_dir) / "compare.txt", rows);
    return out;
}

namespace {

using net::TimedInput;

std::vector<TimedInput> suite_regular_raw(Rng& rng, long long period_ms, double t_end_s,
                                          std::size_t dim) {
    std::vector<TimedInput> out;
    long long end = std::llround(t_end_s * 1000.0);
    for (long long t = period_ms; t <= end; t += period_ms) {
        TimedInput ev;
        ev.timestamp = static_cast<double>(t) / 1000.0;
        for (std::size_t d = 0; d < dim; ++d) ev.features.push_back(rng.uniform(-1.0, 1.0));
        out.push_back(std::move(ev));
    }
    return out;
}

std::vector<TimedInput> suite_regular_ids(Rng& rng, long long period_ms, double t_end_s,
                                          std::size_t slots, long long vocab) {
    std::vector<TimedInput> out;
    long long end = std::llround(t_end_s * 1000.0);
    for (long long t = period_ms; t <= end; t += period_ms) {
        TimedInput ev;
        ev.timestamp = static_cast<double>(t) / 1000.0;
        for (std::size_t s = 0; s < slots; ++s)
            ev.features.push_back(rng.bernoulli(0.3)
                                      ? -1.0
                                      : static_cast<double>(rng.below(
                                            static_cast<std::uint64_t>(vocab))));
        out.push_back(std::move(ev));
    }
    return out;
}

std::vector<TimedInput> suite_async(Rng& rng, double t_end_s, std::size_t dim, bool ids,
                                    long long vocab) {
    std::vector<TimedInput> out;
    double t = 0.0;
    while (true) {
        t += rng.uniform(0.015, 0.06);
        if (t >= t_end_s) break;
        TimedInput ev;
        ev.timestamp = t;
        for (std::size_t d = 0; d < dim; ++d)
            ev.features.push_back(ids ? static_cast<double>(rng.below(
                                            static_cast<std::uint64_t>(vocab)))
                                      : rng.uniform(-1.0, 1.0));
        out.push_back(std::move(ev));
    }
    return out;
}

double suite_case(const net::NetworkConfig& nc,
                  const std::vector<std::vector<TimedInput>>& streams, std::size_t n_steps,
                  std::uint64_t seed) {
    net::NetworkParams params(nc);
    Rng weight_rng(Rng::derive(seed, 1));
    params.init_weights(weight_rng);
    Rng target_rng(Rng::derive(seed, 2));
    std::vector<Vector> targets(n_steps, Vector(net::kHorizon, 0.0));
    for (auto& t : targets)
        for (double& v : t) v = target_rng.bernoulli(0.4) ? 1.0 : 0.0;

    std::vector<net::MasterStepCache> caches;
    net::MultiscaleState state = net::make_state(params);
    net::run_sequence(params, streams, n_steps, true, nullptr, &caches, state);
    net::GradStore grads = net::make_grad_store(params);
    net::backward_sequence(params, caches, {targets.data(), targets.size()}, grads);

    auto loss_fn = [&]() {
        net::MultiscaleState fresh = net::make_state(params);
        std::vector<Vector> ys =
            net::run_sequence(params, streams, n_steps, false, nullptr, nullptr, fresh);
        double total = 0.0;
        for (std::size_t k = 0; k < n_steps; ++k) total += nn::bce_loss(ys[k], targets[k]).loss;
        return total / static_cast<double>(n_steps);
    };

    std::vector<std::vector<double>> fd = nn::finite_diff_grad(loss_fn, params.tensors(), 1e-5);
    return nn::max_grad_rel_error(grads.tensors(), fd);
}

net::ModalityConfig suite_raw_mod(const std::string& name, std::size_t dim, net::Timescale ts,
                                  std::size_t subnet) {
    net::ModalityConfig mc;
    mc.name = name;
    mc.feature_dim = dim;
    mc.timescale = ts;
    mc.subnet_hidden = subnet;
    mc.embed_vocab = 0;
    mc.embed_dim = 0;
    return mc;
}

net::ModalityConfig suite_id_mod(const std::string& name, std::size_t slots, net::Timescale ts,
                                 std::size_t subnet, std::size_t vocab, std::size_t dim) {
    net::ModalityConfig mc;
    mc.name = name;
    mc.feature_dim = slots;
    mc.timescale = ts;
    mc.subnet_hidden = subnet;
    mc.embed_vocab = vocab;
    mc.embed_dim = dim;
    return mc;
}

}  // namespace

std::vector<GradCase> gradient_suite() {
    std::vector<GradCase> out;
    auto add = [&](const std::string& name, const net::NetworkConfig& nc,
                   const std::vector<std::vector<TimedInput>>& streams, std::size_t n_steps,
                   std::uint64_t seed) {
        out.push_back({name, suite_case(nc, streams, n_steps, seed)});
    };

    {
        net::NetworkConfig nc;
        nc.arrangement = net::Arrangement::NoSubnets;
        nc.master_hidden = 4;
        nc.dropout_p = 0.0;
        nc.l2_lambda = 0.0;
        nc.modalities = {suite_raw_mod("feat", 2, net::Timescale::regular(50), 0),
                         suite_id_mod("ids", 2, net::Timescale::regular(50), 0, 7, 3)};
        Rng rng(Rng::derive(501, 0));
        add("no_subnets shared 50ms", nc,
            {suite_regular_raw(rng, 50, 0.3, 2), suite_regular_ids(rng, 50, 0.3, 2, 7)}, 6, 41);
    }
    {
        net::NetworkConfig nc;
        nc.arrangement = net::Arrangement::OneSubnet;
        nc.master_hidden = 4;
        nc.dropout_p = 0.0;
        nc.l2_lambda = 0.0;
        nc.modalities = {suite_raw_mod("feat", 2, net::Timescale::regular(50), 3),
                         suite_id_mod("ids", 1, net::Timescale::regular(50), 3, 7, 3)};
        Rng rng(Rng::derive(501, 1));
        add("one_subnet shared 50ms", nc,
            {suite_regular_raw(rng, 50, 0.25, 2), suite_regular_ids(rng, 50, 0.25, 1, 7)}, 5, 42);
    }
    {
        net::NetworkConfig nc;
        nc.arrangement = net::Arrangement::OneSubnet;
        nc.master_hidden = 3;
        nc.dropout_p = 0.0;
        nc.l2_lambda = 0.0;
        nc.modalities = {suite_raw_mod("feat", 2, net::Timescale::regular(10), 3),
                         suite_id_mod("ids", 1, net::Timescale::regular(10), 3, 5, 2)};
        Rng rng(Rng::derive(501, 2));
        add("one_subnet shared 10ms", nc,
            {suite_regular_raw(rng, 10, 0.25, 2), suite_regular_ids(rng, 10, 0.25, 1, 5)}, 5, 43);
    }
    {
        net::NetworkConfig nc;
        nc.arrangement = net::Arrangement::TwoSubnets;
        nc.master_hidden = 4;
        nc.dropout_p = 0.0;
        nc.l2_lambda = 0.0;
        nc.modalities = {suite_raw_mod("fast", 2, net::Timescale::regular(10), 4),
                         suite_id_mod("slow", 2, net::Timescale::regular(50), 3, 7, 3)};
        Rng rng(Rng::derive(501, 3));
        add("two_subnets 10ms and 50ms", nc,
            {suite_regular_raw(rng, 10, 0.3, 2), suite_regular_ids(rng, 50, 0.3, 2, 7)}, 6, 44);
    }
    {
        net::NetworkConfig nc;
        nc.arrangement = net::Arrangement::TwoSubnets;
        nc.master_hidden = 4;
        nc.dropout_p = 0.0;
        nc.l2_lambda = 0.0;
        nc.modalities = {suite_raw_mod("fast", 2, net::Timescale::regular(10), 3),
                         suite_id_mod("tokens", 1, net::Timescale::asynchronous(), 0, 6, 3)};
        Rng rng(Rng::derive(501, 4));
        add("two_subnets 10ms and asynchronous", nc,
            {suite_regular_raw(rng, 10, 0.4, 2), suite_async(rng, 0.4, 1, true, 6)}, 8, 45);
    }
    {
        net::NetworkConfig nc;
        nc.arrangement = net::Arrangement::TwoSubnets;
        nc.master_hidden = 3;
        nc.dropout_p = 0.0;
        nc.l2_lambda = 0.0;
        nc.modalities = {suite_raw_mod("sensor", 2, net::Timescale::asynchronous(), 3),
                         suite_id_mod("slow", 1, net::Timescale::regular(50), 0, 7, 2)};
        Rng rng(Rng::derive(501, 5));
        add("two_subnets asynchronous and 50ms", nc,
            {suite_async(rng, 0.3, 2, false, 0), suite_regular_ids(rng, 50, 0.3, 1, 7)}, 6, 46);
    }
    {
        net::NetworkConfig nc;
        nc.arrangement = net::Arrangement::TwoSubnets;
        nc.master_hidden = 4;
        nc.dropout_p = 0.0;
        nc.l2_lambda = 0.0;
        nc.modalities = {suite_raw_mod("fast", 2, net::Timescale::regular(10), 3),
                         suite_id_mod("slow", 1, net::Timescale::regular(50), 3, 7, 2)};
        Rng rng(Rng::derive(501, 6));
        add("two_subnets length 1", nc,
            {suite_regular_raw(rng, 10, 0.05, 2), suite_regular_ids(rng, 50, 0.05, 1, 7)}, 1, 47);
    }
    {
        net::NetworkConfig nc;
        nc.arrangement = net::Arrangement::NoSubnets;
        nc.master_hidden = 3;
        nc.dropout_p = 0.0;
        nc.l2_lambda = 0.0;
        nc.modalities = {suite_raw_mod("feat", 2, net::Timescale::regular(50), 0),
                         suite_id_mod("ids", 1, net::Timescale::regular(50), 0, 5, 2)};
        Rng rng(Rng::derive(501, 7));
        add("no_subnets length 10", nc,
            {suite_regular_raw(rng, 50, 0.5, 2), suite_regular_ids(rng, 50, 0.5, 1, 5)}, 10, 48);
    }
    return out;
}

namespace {

int guard(const std::function<int()>& body) {
    try {
        return body();
    } catch (const NumericError& e) {
        std::fprintf(stderr, "numeric error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}

}  // namespace

int cmd_generate(const std::string& config_path, const std::string& out_dir,
                 const std::uint64_t* seed_override) {
    return guard([&] {
        Experiment exp = Experiment::load(config_path);
        std::uint64_t seed = seed_override ? *seed_override : exp.generator_seed;
        const std::string& dest = exp.data_dir.empty() ? out_dir : exp.data_dir;
        generate_corpus(exp, dest, seed);
        std::printf("generated %d train and %d test conversations in %s (seed %llu)\n",
                    exp.n_train, exp.n_test, dest.c_str(),
                    static_cast<unsigned long long>(seed));
        return 0;
    });
}

int cmd_train(const std::string& config_path, const std::string& out_dir,
              const std::uint64_t* seed_override, int jobs) {
    return guard([&] {
        Experiment exp = Experiment::load(config_path);
        if (seed_override) exp.seeds = {*seed_override};
        auto t0 = std::chrono::steady_clock::now();
        TrainOutcome out = train_and_evaluate(exp, out_dir, jobs);
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        for (std::size_t i = 0; i < out.per_seed.size(); ++i) {
            const SeedMetrics& m = out.per_seed[i];
            std::printf("seed %llu: BCE %s  f1 50ms %s  f1 500ms %s  f1 onset %s%s\n",
                        static_cast<unsigned long long>(m.seed), fmt6(m.bce).c_str(),
                        fmt6(m.f1_pause50).c_str(), fmt6(m.f1_pause500).c_str(),
                        fmt6(m.f1_onset).c_str(), i == out.best_index ? "  (best)" : "");
        }
        std::printf("mean:  BCE %s  f1 50ms %s  f1 500ms %s  f1 onset %s\n",
                    fmt6(out.mean.bce).c_str(), fmt6(out.mean.f1_pause50).c_str(),
                    fmt6(out.mean.f1_pause500).c_str(), fmt6(out.mean.f1_onset).c_str());
        std::printf("report and best checkpoint written to %s (%.1fs)\n", out_dir.c_str(), secs);
        return 0;
    });
}

int cmd_gridsearch(const std::string& config_path, const std::string& out_dir, int jobs) {
    return guard([&] {
        Experiment exp = Experiment::load(config_path);
        auto t0 = std::chrono::steady_clock::now();
        GridOutcome out = grid_search(exp, out_dir, jobs);
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const GridPoint& best = out.points[out.best_index];
        std::printf("%zu candidates; best hidden %s dropout %s l2 %s (dev BCE %s, %zu params)\n",
                    out.points.size(), join_partition(best.hidden).c_str(),
                    fmt6(best.dropout).c_str(), fmt6(best.l2).c_str(), fmt6(best.dev_bce).c_str(),
                    best.n_params);
        std::printf("grid table and best.ini written to %s (%.1fs)\n", out_dir.c_str(), secs);
        return 0;
    });
}

int cmd_evaluate(const std::string& config_path, const std::string& out_dir) {
    return guard([&] {
        Experiment exp = Experiment::load(config_path);
        if (exp.eval_checkpoint.empty())
            throw ConfigError("config needs [eval] checkpoint for the evaluate command");
        SeedMetrics m = evaluate_checkpoint(exp, exp.eval_checkpoint, out_dir);
        std::printf("checkpoint: BCE %s  f1 50ms %s  f1 500ms %s  f1 onset %s\n",
                    fmt6(m.bce).c_str(), fmt6(m.f1_pause50).c_str(),
                    fmt6(m.f1_pause500).c_str(), fmt6(m.f1_onset).c_str());
        return 0;
    });
}

int cmd_gradcheck() {
    return guard([&] {
        std::vector<GradCase> cases = gradient_suite();
        bool ok = true;
        for (const GradCase& c : cases) {
            bool pass = c.max_rel_err < kGradTolerance;
            ok = ok && pass;
            std::printf("%-38s max rel err %.3e  %s\n", c.name.c_str(), c.max_rel_err,
                        pass ? "ok" : "FAIL");
        }
        return ok ? 0 : 3;
    });
}

int cmd_compare(const std::string& config_path, const std::string& out_dir) {
    return guard([&] {
        Experiment exp = Experiment::load(config_path);
        if (exp.compare_baseline.empty() || exp.compare_candidate.empty())
            throw ConfigError("config needs [compare] baseline and candidate run directories");
        std::vector<CompareRow> rows =
            compare_runs(exp.compare_baseline, exp.compare_candidate, out_dir);
        for (const CompareRow& r : rows)
            std::printf("%-10s baseline %s  candidate %s  diff %+.6f  p %s\n", r.metric.c_str(),
                        fmt6(r.mean_a).c_str(), fmt6(r.mean_b).c_str(), r.diff,
                        fmt6(r.p_value).c_str());
        return 0;
    });
}

}  // namespace turntaking::run
