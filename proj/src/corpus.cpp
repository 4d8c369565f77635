#include "turntaking/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace turntaking::corpus {

namespace fs = std::filesystem;

namespace {

constexpr double kEpsMs = 1e-6;

long long to_ms(double seconds) { return std::llround(seconds * 1000.0); }

std::string fmt(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

[[noreturn]] void fail_at(const std::string& path, std::size_t line, const std::string& msg) {
    throw DataError(path + ":" + std::to_string(line) + ": " + msg);
}

double parse_double(const std::string& tok, const std::string& path, std::size_t line) {
    double v = 0.0;
    const char* b = tok.data();
    const char* e = b + tok.size();
    auto res = std::from_chars(b, e, v);
    if (res.ec != std::errc() || res.ptr != e) fail_at(path, line, "bad number '" + tok + "'");
    if (!std::isfinite(v)) fail_at(path, line, "non-finite number '" + tok + "'");
    return v;
}

long long parse_int(const std::string& tok, const std::string& path, std::size_t line) {
    long long v = 0;
    const char* b = tok.data();
    const char* e = b + tok.size();
    auto res = std::from_chars(b, e, v);
    if (res.ec != std::errc() || res.ptr != e) fail_at(path, line, "bad integer '" + tok + "'");
    return v;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (true) {
        std::size_t comma = line.find(',', pos);
        if (comma == std::string::npos) {
            out.push_back(line.substr(pos));
            return out;
        }
        out.push_back(line.substr(pos, comma - pos));
        pos = comma + 1;
    }
}

class LineReader {
  public:
    explicit LineReader(const std::string& path) : path_(path), in_(path) {
        if (!in_) throw DataError("cannot open " + path);
    }

    bool next(std::string& line) {
        if (!std::getline(in_, line)) return false;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        ++lineno_;
        return true;
    }

    std::size_t lineno() const { return lineno_; }
    const std::string& path() const { return path_; }

  private:
    std::string path_;
    std::ifstream in_;
    std::size_t lineno_ = 0;
};

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    return out;
}

}  // namespace

char speaker_letter(int speaker) {
    if (speaker == 0) return 'A';
    if (speaker == 1) return 'B';
    throw DataError("speaker index out of range: " + std::to_string(speaker));
}

int speaker_index(const std::string& s) {
    if (s == "A") return 0;
    if (s == "B") return 1;
    throw DataError("unknown speaker '" + s + "'");
}

void SpeechActivity::validate(double duration_s) const {
    for (int s = 0; s < kSpeakers; ++s) {
        double prev_end = 0.0;
        for (const Interval& iv : speaker[s]) {
            if (!(iv.start_s < iv.end_s))
                throw DataError("interval end " + fmt(iv.end_s) + " precedes start " +
                                fmt(iv.start_s));
            if (iv.start_s < prev_end - 1e-9)
                throw DataError("speaker " + std::string(1, speaker_letter(s)) +
                                " intervals overlap near " + fmt(iv.start_s));
            if (iv.start_s < -1e-9 || iv.end_s > duration_s + 1e-9)
                throw DataError("interval [" + fmt(iv.start_s) + ", " + fmt(iv.end_s) +
                                ") outside conversation of " + fmt(duration_s) + "s");
            prev_end = iv.end_s;
        }
    }
}

const FeatureStream* Conversation::find_stream(const std::string& modality, int spk) const {
    for (const FeatureStream& fsr : streams)
        if (fsr.modality == modality && fsr.speaker == spk) return &fsr;
    return nullptr;
}

void Conversation::validate() const {
    if (duration_s <= 0.0) throw DataError("conversation " + id + " has no duration");
    activity.validate(duration_s);
    for (const WordToken& w : words) {
        if (!(w.start_s < w.end_s)) throw DataError("word '" + w.word + "' ends before it starts");
        if (w.speaker != 0 && w.speaker != 1) throw DataError("word with bad speaker index");
    }
    for (const FeatureStream& fsr : streams) {
        double prev = -1.0;
        for (const net::TimedInput& ev : fsr.events) {
            if (ev.features.size() != fsr.dim)
                throw DataError("stream " + fsr.modality + " has a ragged row");
            if (ev.timestamp <= prev)
                throw DataError("stream " + fsr.modality + " timestamps not increasing");
            prev = ev.timestamp;
        }
    }
}

long long Vocabulary::lookup(const std::string& word) const {
    auto it = word_to_id.find(word);
    return it == word_to_id.end() ? 0 : it->second;
}

Vocabulary Vocabulary::build(const std::vector<const Conversation*>& train) {
    std::set<std::string> seen;
    for (const Conversation* c : train)
        for (const WordToken& w : c->words) seen.insert(w.word);
    seen.erase("<oov>");
    Vocabulary v;
    v.id_to_word.push_back("<oov>");
    for (const std::string& w : seen) v.id_to_word.push_back(w);
    for (std::size_t i = 0; i < v.id_to_word.size(); ++i)
        v.word_to_id[v.id_to_word[i]] = static_cast<long long>(i);
    return v;
}

void Vocabulary::save(const std::string& path) const {
    std::ofstream out = open_out(path);
    for (std::size_t i = 0; i < id_to_word.size(); ++i)
        out << id_to_word[i] << "=" << i << "\n";
    if (!out) throw DataError("write failed: " + path);
}

Vocabulary Vocabulary::load(const std::string& path) {
    LineReader in(path);
    std::vector<std::pair<std::string, long long>> rows;
    std::string line;
    while (in.next(line)) {
        if (line.empty()) continue;
        std::size_t eq = line.rfind('=');
        if (eq == std::string::npos || eq == 0) fail_at(path, in.lineno(), "expected word=id");
        rows.emplace_back(line.substr(0, eq), parse_int(line.substr(eq + 1), path, in.lineno()));
    }
    if (rows.empty()) throw DataError(path + ": empty vocabulary");
    Vocabulary v;
    v.id_to_word.resize(rows.size());
    for (const auto& [word, id] : rows) {
        if (id < 0 || id >= static_cast<long long>(rows.size()) || !v.id_to_word[id].empty())
            throw DataError(path + ": ids must be dense starting at 0");
        v.id_to_word[id] = word;
    }
    for (std::size_t i = 0; i < v.id_to_word.size(); ++i)
        v.word_to_id[v.id_to_word[i]] = static_cast<long long>(i);
    return v;
}

void write_manifest(const std::string& path, const std::vector<ManifestRow>& rows) {
    std::ofstream out = open_out(path);
    for (const ManifestRow& r : rows)
        out << r.split << "," << r.conv_id << "," << fmt(r.duration_s) << "\n";
    if (!out) throw DataError("write failed: " + path);
}

std::vector<ManifestRow> read_manifest(const std::string& path) {
    LineReader in(path);
    std::vector<ManifestRow> rows;
    std::string line;
    while (in.next(line)) {
        if (line.empty()) continue;
        std::vector<std::string> f = split_csv(line);
        if (f.size() != 3) fail_at(path, in.lineno(), "expected split,conv_id,duration_s");
        if (f[0] != "train" && f[0] != "test")
            fail_at(path, in.lineno(), "unknown split '" + f[0] + "'");
        if (f[1].empty()) fail_at(path, in.lineno(), "empty conversation id");
        double dur = parse_double(f[2], path, in.lineno());
        if (dur <= 0.0) fail_at(path, in.lineno(), "duration must be positive");
        rows.push_back({f[0], f[1], dur});
    }
    return rows;
}

void save_conversation(const std::string& corpus_dir, const Conversation& conv) {
    conv.validate();
    fs::path dir = fs::path(corpus_dir) / conv.id;
    fs::create_directories(dir);

    {
        std::ofstream out = open_out((dir / "activity.csv").string());
        for (int s = 0; s < kSpeakers; ++s)
            for (const Interval& iv : conv.activity.speaker[s])
                out << speaker_letter(s) << "," << fmt(iv.start_s) << "," << fmt(iv.end_s) << "\n";
        if (!out) throw DataError("write failed: activity.csv");
    }
    {
        std::ofstream out = open_out((dir / "words.csv").string());
        for (const WordToken& w : conv.words)
            out << speaker_letter(w.speaker) << "," << w.word << "," << fmt(w.start_s) << ","
                << fmt(w.end_s) << "\n";
        if (!out) throw DataError("write failed: words.csv");
    }
    for (const FeatureStream& fsr : conv.streams) {
        std::string name = "features_" + fsr.modality + "_" + speaker_letter(fsr.speaker) + ".csv";
        std::ofstream out = open_out((dir / name).string());
        for (const net::TimedInput& ev : fsr.events) {
            out << fmt(ev.timestamp);
            for (double v : ev.features) out << "," << fmt(v);
            out << "\n";
        }
        if (!out) throw DataError("write failed: " + name);
    }
}

namespace {

void load_activity(const std::string& path, SpeechActivity& activity, double duration_s) {
    LineReader in(path);
    std::string line;
    std::array<double, 2> prev_end = {0.0, 0.0};
    while (in.next(line)) {
        if (line.empty()) continue;
        std::vector<std::string> f = split_csv(line);
        if (f.size() != 3) fail_at(path, in.lineno(), "expected speaker,start_s,end_s");
        int s;
        try {
            s = speaker_index(f[0]);
        } catch (const DataError& e) {
            fail_at(path, in.lineno(), e.what());
        }
        double start = parse_double(f[1], path, in.lineno());
        double end = parse_double(f[2], path, in.lineno());
        if (!(start < end))
            fail_at(path, in.lineno(),
                    "interval end " + f[2] + " precedes start " + f[1]);
        if (start < prev_end[s] - 1e-9)
            fail_at(path, in.lineno(), "interval overlaps the previous one for speaker " + f[0]);
        if (start < 0.0 || end > duration_s + 1e-9)
            fail_at(path, in.lineno(), "interval outside the conversation");
        activity.speaker[s].push_back({start, end});
        prev_end[s] = end;
    }
}

void load_words(const std::string& path, std::vector<WordToken>& words) {
    LineReader in(path);
    std::string line;
    while (in.next(line)) {
        if (line.empty()) continue;
        std::vector<std::string> f = split_csv(line);
        if (f.size() != 4) fail_at(path, in.lineno(), "expected speaker,word,start_s,end_s");
        int s;
        try {
            s = speaker_index(f[0]);
        } catch (const DataError& e) {
            fail_at(path, in.lineno(), e.what());
        }
        if (f[1].empty()) fail_at(path, in.lineno(), "empty word");
        double start = parse_double(f[2], path, in.lineno());
        double end = parse_double(f[3], path, in.lineno());
        if (!(start < end)) fail_at(path, in.lineno(), "word ends before it starts");
        words.push_back({s, f[1], start, end});
    }
    std::stable_sort(words.begin(), words.end(),
                     [](const WordToken& a, const WordToken& b) { return a.end_s < b.end_s; });
}

FeatureStream load_features(const std::string& path, const std::string& modality, int speaker) {
    LineReader in(path);
    FeatureStream fsr;
    fsr.speaker = speaker;
    fsr.modality = modality;
    std::string line;
    double prev_t = -1.0;
    while (in.next(line)) {
        if (line.empty()) continue;
        std::vector<std::string> f = split_csv(line);
        if (f.size() < 2) fail_at(path, in.lineno(), "expected t_s,f1,...");
        net::TimedInput ev;
        ev.timestamp = parse_double(f[0], path, in.lineno());
        if (ev.timestamp <= prev_t) fail_at(path, in.lineno(), "timestamps must increase");
        prev_t = ev.timestamp;
        ev.features.reserve(f.size() - 1);
        for (std::size_t i = 1; i < f.size(); ++i)
            ev.features.push_back(parse_double(f[i], path, in.lineno()));
        if (fsr.dim == 0)
            fsr.dim = ev.features.size();
        else if (ev.features.size() != fsr.dim)
            fail_at(path, in.lineno(), "row has " + std::to_string(ev.features.size()) +
                                           " values, expected " + std::to_string(fsr.dim));
        fsr.events.push_back(std::move(ev));
    }
    return fsr;
}

}  // namespace

Conversation load_conversation(const std::string& corpus_dir, const std::string& conv_id,
                               double duration_s) {
    fs::path dir = fs::path(corpus_dir) / conv_id;
    if (!fs::is_directory(dir)) throw DataError("missing conversation directory " + dir.string());

    Conversation conv;
    conv.id = conv_id;
    conv.duration_s = duration_s;
    load_activity((dir / "activity.csv").string(), conv.activity, duration_s);
    if (fs::exists(dir / "words.csv")) load_words((dir / "words.csv").string(), conv.words);

    std::vector<std::string> names;
    for (const auto& entry : fs::directory_iterator(dir)) {
        std::string name = entry.path().filename().string();
        if (name.rfind("features_", 0) == 0 && name.size() > 15 &&
            name.compare(name.size() - 4, 4, ".csv") == 0)
            names.push_back(name);
    }
    std::sort(names.begin(), names.end());
    for (const std::string& name : names) {
        std::string stem = name.substr(9, name.size() - 13);  // <modality>_<A|B>
        if (stem.size() < 3 || stem[stem.size() - 2] != '_')
            throw DataError("unrecognized feature file name " + name);
        std::string modality = stem.substr(0, stem.size() - 2);
        int speaker = speaker_index(stem.substr(stem.size() - 1));
        conv.streams.push_back(load_features((dir / name).string(), modality, speaker));
    }
    conv.validate();
    return conv;
}

Corpus load_corpus(const std::string& dir) {
    Corpus c;
    c.dir = dir;
    std::vector<ManifestRow> rows = read_manifest((fs::path(dir) / "manifest.csv").string());
    if (rows.empty()) throw DataError(dir + ": empty manifest");
    for (const ManifestRow& r : rows) {
        Conversation conv = load_conversation(dir, r.conv_id, r.duration_s);
        (r.split == "train" ? c.train : c.test).push_back(std::move(conv));
    }
    c.vocabulary = Vocabulary::load((fs::path(dir) / "vocabulary.txt").string());
    return c;
}

void zscore_normalize(std::vector<net::TimedInput>& events) {
    if (events.empty()) return;
    std::size_t dim = events[0].features.size();
    std::size_t n = events.size();
    Vector mean(dim, 0.0), var(dim, 0.0);
    for (const net::TimedInput& ev : events) {
        if (ev.features.size() != dim) throw DataError("ragged stream in zscore_normalize");
        for (std::size_t d = 0; d < dim; ++d) mean[d] += ev.features[d];
    }
    for (std::size_t d = 0; d < dim; ++d) mean[d] /= static_cast<double>(n);
    for (const net::TimedInput& ev : events)
        for (std::size_t d = 0; d < dim; ++d) {
            double c = ev.features[d] - mean[d];
            var[d] += c * c;
        }
    for (std::size_t d = 0; d < dim; ++d) {
        double sd = n > 1 ? std::sqrt(var[d] / static_cast<double>(n - 1)) : 0.0;
        if (sd > 0.0) {
            for (net::TimedInput& ev : events) ev.features[d] = (ev.features[d] - mean[d]) / sd;
        } else {
            for (net::TimedInput& ev : events) ev.features[d] = 0.0;
        }
    }
}

std::vector<net::TimedInput> resample_regular(const std::vector<net::TimedInput>& events,
                                              long long period_ms, double duration_s) {
    if (period_ms <= 0) throw ConfigError("resample period must be positive");
    long long end_ms = (to_ms(duration_s) / period_ms) * period_ms;
    std::size_t dim = events.empty() ? 0 : events[0].features.size();
    std::vector<net::TimedInput> out;
    out.reserve(static_cast<std::size_t>(end_ms / period_ms));
    Vector held(dim, 0.0);
    std::size_t i = 0;
    for (long long g = period_ms; g <= end_ms; g += period_ms) {
        Vector acc(dim, 0.0);
        std::size_t count = 0;
        while (i < events.size() && events[i].timestamp * 1000.0 <= g + kEpsMs) {
            const Vector& f = events[i].features;
            if (f.size() != dim) throw DataError("ragged stream in resample_regular");
            for (std::size_t d = 0; d < dim; ++d) acc[d] += f[d];
            ++count;
            ++i;
        }
        if (count > 0)
            for (std::size_t d = 0; d < dim; ++d) held[d] = acc[d] / static_cast<double>(count);
        out.push_back({static_cast<double>(g) / 1000.0, held});
    }
    return out;
}

std::vector<net::TimedInput> linguistic_events(const std::vector<WordToken>& words, int speaker,
                                               const Vocabulary& vocab, LingMode mode,
                                               long long period_ms, double duration_s,
                                               long long delay_ms, int* collisions) {
    std::vector<const WordToken*> own;
    for (const WordToken& w : words)
        if (w.speaker == speaker) own.push_back(&w);
    std::stable_sort(own.begin(), own.end(),
                     [](const WordToken* a, const WordToken* b) { return a->end_s < b->end_s; });

    std::vector<net::TimedInput> out;
    if (mode == LingMode::Asynchronous) {
        for (const WordToken* w : own) {
            long long t = to_ms(w->end_s) + delay_ms;
            if (t > to_ms(duration_s)) continue;
            double t_s = static_cast<double>(t) / 1000.0;
            double id = static_cast<double>(vocab.lookup(w->word));
            if (!out.empty() && to_ms(out.back().timestamp) == t) {
                out.back().features[0] = id;
                if (collisions) ++*collisions;
            } else {
                out.push_back({t_s, {id}});
            }
        }
        return out;
    }

    if (period_ms <= 0) throw ConfigError("linguistic grid period must be positive");
    long long end_ms = (to_ms(duration_s) / period_ms) * period_ms;
    std::size_t frames = static_cast<std::size_t>(end_ms / period_ms);
    std::vector<double> slot(frames, -1.0);
    for (const WordToken* w : own) {
        long long t = to_ms(w->end_s) + delay_ms;
        long long g = ((t + period_ms - 1) / period_ms) * period_ms;
        if (g < period_ms || g > end_ms) continue;
        std::size_t idx = static_cast<std::size_t>(g / period_ms) - 1;
        if (slot[idx] >= 0.0 && collisions) ++*collisions;
        slot[idx] = static_cast<double>(vocab.lookup(w->word));
    }
    out.reserve(frames);
    for (std::size_t k = 0; k < frames; ++k)
        out.push_back({static_cast<double>((k + 1) * period_ms) / 1000.0, {slot[k]}});
    return out;
}

std::vector<int> frame_labels(const std::vector<Interval>& intervals, double duration_s,
                              long long frame_ms) {
    if (frame_ms <= 0) throw ConfigError("frame length must be positive");
    long long dur = to_ms(duration_s);
    std::size_t frames = static_cast<std::size_t>(dur / frame_ms);
    std::vector<long long> overlap(frames, 0);
    for (const Interval& iv : intervals) {
        long long s = std::max<long long>(0, to_ms(iv.start_s));
        long long e = std::min(dur, to_ms(iv.end_s));
        if (e <= s) continue;
        for (long long k = s / frame_ms; k < (e + frame_ms - 1) / frame_ms; ++k) {
            if (k >= static_cast<long long>(frames)) break;
            long long lo = std::max(s, k * frame_ms);
            long long hi = std::min(e, (k + 1) * frame_ms);
            overlap[static_cast<std::size_t>(k)] += hi - lo;
        }
    }
    std::vector<int> labels(frames, 0);
    for (std::size_t k = 0; k < frames; ++k) labels[k] = (2 * overlap[k] >= frame_ms) ? 1 : 0;
    return labels;
}

std::vector<Vector> frame_targets(const SpeechActivity& activity, int speaker, double duration_s,
                                  long long frame_ms, std::size_t horizon) {
    if (speaker != 0 && speaker != 1) throw DataError("speaker index out of range");
    std::vector<int> labels = frame_labels(activity.speaker[speaker], duration_s, frame_ms);
    std::size_t frames = labels.size();
    if (frames <= horizon) return {};
    std::size_t n = frames - horizon;
    std::vector<Vector> targets(n);
    for (std::size_t t = 0; t < n; ++t) {
        targets[t].resize(horizon);
        for (std::size_t j = 0; j < horizon; ++j)
            targets[t][j] = static_cast<double>(labels[t + 1 + j]);
    }
    return targets;
}

namespace {

// Concatenates per-speaker halves of two identically gridded dense streams.
std::vector<net::TimedInput> zip_dense(const std::vector<net::TimedInput>& target,
                                       const std::vector<net::TimedInput>& partner) {
    if (target.size() != partner.size())
        throw DataError("dense streams disagree on length: " + std::to_string(target.size()) +
                        " vs " + std::to_string(partner.size()));
    std::vector<net::TimedInput> out;
    out.reserve(target.size());
    for (std::size_t i = 0; i < target.size(); ++i) {
        if (to_ms(target[i].timestamp) != to_ms(partner[i].timestamp))
            throw DataError("dense streams disagree on the grid");
        net::TimedInput ev;
        ev.timestamp = target[i].timestamp;
        ev.features = target[i].features;
        ev.features.insert(ev.features.end(), partner[i].features.begin(),
                           partner[i].features.end());
        out.push_back(std::move(ev));
    }
    return out;
}

// Merges two sparse id streams; a missing half at a timestamp is -1 (absent).
std::vector<net::TimedInput> zip_sparse_ids(const std::vector<net::TimedInput>& target,
                                            const std::vector<net::TimedInput>& partner) {
    std::vector<net::TimedInput> out;
    std::size_t i = 0, j = 0;
    while (i < target.size() || j < partner.size()) {
        long long ti = i < target.size() ? to_ms(target[i].timestamp) : -1;
        long long tj = j < partner.size() ? to_ms(partner[j].timestamp) : -1;
        net::TimedInput ev;
        if (j >= partner.size() || (i < target.size() && ti < tj)) {
            ev.timestamp = target[i].timestamp;
            ev.features = {target[i].features[0], -1.0};
            ++i;
        } else if (i >= target.size() || tj < ti) {
            ev.timestamp = partner[j].timestamp;
            ev.features = {-1.0, partner[j].features[0]};
            ++j;
        } else {
            ev.timestamp = target[i].timestamp;
            ev.features = {target[i].features[0], partner[j].features[0]};
            ++i;
            ++j;
        }
        out.push_back(std::move(ev));
    }
    return out;
}

// Merges two sparse feature streams; each event carries the latest value of
// both halves (zeros before a half has emitted anything).
std::vector<net::TimedInput> zip_sparse_hold(const std::vector<net::TimedInput>& target,
                                             const std::vector<net::TimedInput>& partner) {
    std::size_t dim_t = target.empty() ? 0 : target[0].features.size();
    std::size_t dim_p = partner.empty() ? 0 : partner[0].features.size();
    Vector held_t(dim_t, 0.0), held_p(dim_p, 0.0);
    std::vector<net::TimedInput> out;
    std::size_t i = 0, j = 0;
    while (i < target.size() || j < partner.size()) {
        long long ti = i < target.size() ? to_ms(target[i].timestamp) : 0;
        long long tj = j < partner.size() ? to_ms(partner[j].timestamp) : 0;
        double ts;
        if (j >= partner.size() || (i < target.size() && ti <= tj)) {
            ts = target[i].timestamp;
            held_t = target[i].features;
            ++i;
            if (j < partner.size() && ti == tj) {
                held_p = partner[j].features;
                ++j;
            }
        } else {
            ts = partner[j].timestamp;
            held_p = partner[j].features;
            ++j;
        }
        net::TimedInput ev;
        ev.timestamp = ts;
        ev.features = held_t;
        ev.features.insert(ev.features.end(), held_p.begin(), held_p.end());
        out.push_back(std::move(ev));
    }
    return out;
}

}  // namespace

std::vector<net::TrainSequence> build_dataset(const std::vector<Conversation>& conversations,
                                              const std::vector<ModalityPlan>& plan,
                                              const Vocabulary& vocab, DatasetReport* report) {
    if (plan.empty()) throw ConfigError("dataset plan has no modalities");
    std::vector<net::TrainSequence> out;
    for (const Conversation& conv : conversations) {
        std::array<std::vector<Vector>, 2> targets = {
            frame_targets(conv.activity, 0, conv.duration_s),
            frame_targets(conv.activity, 1, conv.duration_s)};
        if (targets[0].empty()) {
            if (report)
                report->warnings.push_back("conversation " + conv.id +
                                           " too short for the prediction window; skipped");
            continue;
        }

        // Per modality, per speaker, the single-speaker stream.
        std::vector<std::array<std::vector<net::TimedInput>, 2>> half(plan.size());
        bool usable = true;
        for (std::size_t m = 0; m < plan.size() && usable; ++m) {
            const ModalityPlan& p = plan[m];
            for (int s = 0; s < kSpeakers; ++s) {
                if (p.words) {
                    int coll = 0;
                    LingMode mode = p.timescale.is_regular() ? LingMode::Regular
                                                             : LingMode::Asynchronous;
                    half[m][s] = linguistic_events(conv.words, s, vocab, mode,
                                                   p.timescale.period_ms, conv.duration_s, 100,
                                                   &coll);
                    if (report) report->word_collisions += coll;
                } else {
                    const FeatureStream* fsr = conv.find_stream(p.source, s);
                    if (!fsr) {
                        if (report)
                            report->warnings.push_back("conversation " + conv.id + " lacks " +
                                                       p.source + " for speaker " +
                                                       std::string(1, speaker_letter(s)) +
                                                       "; skipped");
                        usable = false;
                        break;
                    }
                    std::vector<net::TimedInput> ev;
                    if (p.timescale.is_regular())
                        ev = resample_regular(fsr->events, p.timescale.period_ms,
                                              conv.duration_s);
                    else
                        ev = fsr->events;
                    zscore_normalize(ev);
                    half[m][s] = std::move(ev);
                }
            }
        }
        if (!usable) continue;

        for (int persp = 0; persp < kSpeakers; ++persp) {
            net::TrainSequence seq;
            seq.id = conv.id + "#" + speaker_letter(persp);
            seq.targets = targets[persp];
            seq.streams.resize(plan.size());
            for (std::size_t m = 0; m < plan.size(); ++m) {
                const auto& mine = half[m][persp];
                const auto& theirs = half[m][1 - persp];
                if (plan[m].timescale.is_regular())
                    seq.streams[m] = zip_dense(mine, theirs);
                else if (plan[m].words)
                    seq.streams[m] = zip_sparse_ids(mine, theirs);
                else
                    seq.streams[m] = zip_sparse_hold(mine, theirs);
            }
            out.push_back(std::move(seq));
        }
    }
    return out;
}

void GeneratorConfig::validate() const {
    if (duration_s < 10.0) throw ConfigError("generator duration must be at least 10s");
    if (turn_min_s <= 0.0 || turn_min_s > turn_mean_s || turn_mean_s > turn_max_s)
        throw ConfigError("turn duration bounds must satisfy 0 < min <= mean <= max");
    if (gap_min_s <= 0.0 || gap_min_s > gap_mean_s || gap_mean_s > gap_max_s)
        throw ConfigError("gap duration bounds must satisfy 0 < min <= mean <= max");
    for (double p : {overlap_prob, p_cue, p_shift_cue, p_shift_nocue, backchannel_prob})
        if (p < 0.0 || p > 1.0) throw ConfigError("generator probabilities must be in [0, 1]");
    if (word_min_s <= 0.0 || word_min_s > word_max_s)
        throw ConfigError("word duration bounds must satisfy 0 < min <= max");
    if (vocab_fillers < 1) throw ConfigError("need at least one filler word");
    if (noise < 0.0) throw ConfigError("noise must be non-negative");
}

namespace {

struct Segment {
    int speaker;
    double start, end;
    bool cue;
};

double clamp(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

std::string filler_word(int k) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "w%02d", k + 1);
    return buf;
}

}  // namespace

Conversation synth_generate(const GeneratorConfig& cfg, Rng& rng) {
    cfg.validate();
    Conversation conv;
    conv.duration_s = cfg.duration_s;

    std::vector<Segment> segments;
    std::array<double, 2> prev_end = {0.0, 0.0};
    int s = static_cast<int>(rng.below(2));
    double t = clamp(rng.exponential(cfg.gap_mean_s), cfg.gap_min_s, cfg.gap_max_s);
    while (t < cfg.duration_s - cfg.turn_min_s) {
        double len = clamp(rng.exponential(cfg.turn_mean_s), cfg.turn_min_s, cfg.turn_max_s);
        double end = std::min(t + len, cfg.duration_s);
        if (end - t < 0.1) break;
        bool cue = rng.bernoulli(cfg.p_cue);
        segments.push_back({s, t, end, cue});
        prev_end[s] = end;

        bool shift = rng.bernoulli(cue ? cfg.p_shift_cue : cfg.p_shift_nocue);
        int next_s = shift ? 1 - s : s;
        double t_next;
        if (shift && rng.bernoulli(cfg.overlap_prob)) {
            double ov = clamp(rng.exponential(cfg.overlap_mean_s), 0.05, cfg.overlap_max_s);
            t_next = end - std::min(ov, (end - t) * 0.5);
        } else {
            t_next = end + clamp(rng.exponential(cfg.gap_mean_s), cfg.gap_min_s, cfg.gap_max_s);
        }
        t = std::max(t_next, prev_end[next_s] + cfg.gap_min_s);
        s = next_s;
    }

    // Words tile each segment; the final word carries the lexical cue.
    for (const Segment& seg : segments) {
        std::size_t first = conv.words.size();
        double tau = seg.start;
        while (seg.end - tau > 1e-9) {
            double remaining = seg.end - tau;
            double wlen = remaining <= cfg.word_max_s + cfg.word_min_s
                              ? remaining
                              : rng.uniform(cfg.word_min_s, cfg.word_max_s);
            std::string word = filler_word(static_cast<int>(rng.below(
                static_cast<std::uint64_t>(cfg.vocab_fillers))));
            conv.words.push_back({seg.speaker, word, tau, tau + wlen});
            tau += wlen;
        }
        if (seg.cue && conv.words.size() > first) conv.words.back().word = "cue";
    }

    for (const Segment& seg : segments)
        conv.activity.speaker[seg.speaker].push_back({seg.start, seg.end});

    // Listener backchannels inside long turns, kept clear of the listener's
    // own speech so they sit in wide own-silence.
    for (const Segment& seg : segments) {
        if (seg.end - seg.start < 4.0) continue;
        if (!rng.bernoulli(cfg.backchannel_prob)) continue;
        double blen = rng.uniform(0.5, 0.9);
        double hi = seg.end - 1.2 - blen;
        double lo = seg.start + 1.2;
        if (hi <= lo) continue;
        double tb = rng.uniform(lo, hi);
        int listener = 1 - seg.speaker;
        auto& own = conv.activity.speaker[listener];
        auto next_it = std::lower_bound(own.begin(), own.end(), tb,
                                        [](const Interval& iv, double v) {
                                            return iv.start_s < v;
                                        });
        double before = next_it == own.begin() ? 0.0 : (next_it - 1)->end_s;
        double after = next_it == own.end() ? 1e18 : next_it->start_s;
        if (before > tb - 1.6 || after < tb + blen + 5.1) continue;
        if (tb + blen > cfg.duration_s) continue;
        own.insert(next_it, {tb, tb + blen});
        conv.words.push_back({listener, "uhhuh", tb, tb + blen});
    }

    std::stable_sort(conv.words.begin(), conv.words.end(),
                     [](const WordToken& a, const WordToken& b) { return a.end_s < b.end_s; });

    // 10ms acoustic stream per speaker: a speech level and a prosodic ramp
    // that rises over the final 500ms of each utterance.
    long long dur_ms = to_ms(cfg.duration_s);
    for (int spk = 0; spk < kSpeakers; ++spk) {
        FeatureStream fsr;
        fsr.speaker = spk;
        fsr.modality = "acoustic";
        fsr.dim = 2;
        const auto& ivs = conv.activity.speaker[spk];
        std::size_t cursor = 0;
        for (long long g = 10; g <= dur_ms; g += 10) {
            double tg = static_cast<double>(g) / 1000.0;
            while (cursor < ivs.size() && ivs[cursor].end_s <= tg) ++cursor;
            bool active = cursor < ivs.size() && ivs[cursor].start_s <= tg;
            double level = active ? 1.0 : 0.0;
            double ramp = 0.0;
            if (active) {
                double to_end = ivs[cursor].end_s - tg;
                if (to_end <= 0.5) ramp = 1.0 - to_end / 0.5;
            }
            level += cfg.noise * rng.normal();
            ramp += 0.5 * cfg.noise * rng.normal();
            fsr.events.push_back({tg, {level, ramp}});
        }
        conv.streams.push_back(std::move(fsr));
    }

    if (cfg.gaze) {
        for (int spk = 0; spk < kSpeakers; ++spk) {
            FeatureStream fsr;
            fsr.speaker = spk;
            fsr.modality = "gaze";
            fsr.dim = 1;
            const auto& ivs = conv.activity.speaker[spk];
            std::size_t cursor = 0;
            double x = 0.0;
            for (long long k = 1;; ++k) {
                double tg = static_cast<double>(k) / 58.0;
                if (tg > cfg.duration_s) break;
                while (cursor < ivs.size() && ivs[cursor].end_s <= tg) ++cursor;
                bool active = cursor < ivs.size() && ivs[cursor].start_s <= tg;
                double target = active && ivs[cursor].end_s - tg <= 0.7 ? 1.0 : 0.0;
                x += 0.25 * (target - x) + cfg.noise * rng.normal();
                fsr.events.push_back({tg, {x}});
            }
            conv.streams.push_back(std::move(fsr));
        }
    }

    conv.validate();
    return conv;
}

}  // namespace turntaking::corpus
