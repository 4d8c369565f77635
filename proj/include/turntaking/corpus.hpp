#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "turntaking/network.hpp"
#include "turntaking/rng.hpp"

namespace turntaking::corpus {

// Speakers are indexed 0 and 1, written as A and B in files.
inline constexpr int kSpeakers = 2;

char speaker_letter(int speaker);
int speaker_index(const std::string& s);

struct Interval {
    double start_s = 0.0;
    double end_s = 0.0;
};

// Per speaker: sorted, non-overlapping speech intervals.
struct SpeechActivity {
    std::array<std::vector<Interval>, 2> speaker;

    void validate(double duration_s) const;  // throws DataError
};

struct WordToken {
    int speaker = 0;
    std::string word;
    double start_s = 0.0;
    double end_s = 0.0;
};

struct FeatureStream {
    int speaker = 0;
    std::string modality;
    std::size_t dim = 0;
    std::vector<net::TimedInput> events;
};

struct Conversation {
    std::string id;
    double duration_s = 0.0;
    SpeechActivity activity;
    std::vector<WordToken> words;  // sorted by end_s
    std::vector<FeatureStream> streams;

    const FeatureStream* find_stream(const std::string& modality, int speaker) const;
    void validate() const;
};

// Dense ids; id 0 is the out-of-vocabulary token.
struct Vocabulary {
    std::vector<std::string> id_to_word;  // index 0 = OOV marker
    std::map<std::string, long long> word_to_id;

    std::size_t size() const { return id_to_word.size(); }
    long long lookup(const std::string& word) const;  // 0 when absent

    static Vocabulary build(const std::vector<const Conversation*>& train);
    void save(const std::string& path) const;
    static Vocabulary load(const std::string& path);
};

// ---- Corpus directory layout ----------------------------------------------
// <dir>/manifest.csv               split,conv_id,duration_s
// <dir>/vocabulary.txt             word=id
// <dir>/<conv_id>/activity.csv     speaker,start_s,end_s
// <dir>/<conv_id>/words.csv        speaker,word,start_s,end_s
// <dir>/<conv_id>/features_<modality>_<A|B>.csv   t_s,f1,f2,...

struct ManifestRow {
    std::string split;
    std::string conv_id;
    double duration_s = 0.0;
};

void write_manifest(const std::string& path, const std::vector<ManifestRow>& rows);
std::vector<ManifestRow> read_manifest(const std::string& path);

void save_conversation(const std::string& corpus_dir, const Conversation& conv);
Conversation load_conversation(const std::string& corpus_dir, const std::string& conv_id,
                               double duration_s);

struct Corpus {
    std::string dir;
    std::vector<Conversation> train;
    std::vector<Conversation> test;
    Vocabulary vocabulary;
};

Corpus load_corpus(const std::string& dir);

// ---- Transforms ------------------------------------------------------------

// Per-dimension z-score over the file; sample variance (n-1); a zero-variance
// dimension maps to all zeros.
void zscore_normalize(std::vector<net::TimedInput>& events);

// Window-averages a stream onto the regular grid p, 2p, ... up to duration.
// A window without samples carries the previous grid value (zeros initially).
std::vector<net::TimedInput> resample_regular(const std::vector<net::TimedInput>& events,
                                              long long period_ms, double duration_s);

enum class LingMode { Regular, Asynchronous };

// One speaker's word tokens to timed events; each word surfaces 100ms after
// its end. Regular mode snaps up to the grid and emits a dense stream with
// -1 (absent) filler; two words on one grid frame keep the later-ending word.
// Asynchronous mode emits sparse events at the exact delayed times.
std::vector<net::TimedInput> linguistic_events(const std::vector<WordToken>& words, int speaker,
                                               const Vocabulary& vocab, LingMode mode,
                                               long long period_ms, double duration_s,
                                               long long delay_ms = 100,
                                               int* collisions = nullptr);

// Frame k covers [k*50ms, (k+1)*50ms); label 1 iff the speaker is active for
// at least half of the frame.
std::vector<int> frame_labels(const std::vector<Interval>& intervals, double duration_s,
                              long long frame_ms = 50);

// Target at frame t = labels of frames t+1..t+horizon; frames whose window
// would run past the end of the conversation are excluded.
std::vector<Vector> frame_targets(const SpeechActivity& activity, int speaker, double duration_s,
                                  long long frame_ms = 50, std::size_t horizon = net::kHorizon);

// ---- Dataset assembly -------------------------------------------------------

struct ModalityPlan {
    std::string name;
    bool words = false;   // built from word annotations instead of a feature stream
    std::string source;   // feature stream label when words == false
    net::Timescale timescale;
};

struct DatasetReport {
    int word_collisions = 0;
    std::vector<std::string> warnings;
};

// Two sequences per conversation, one per target-speaker perspective; each
// modality vector is the concatenation (target speaker, interlocutor).
// Feature streams are resampled onto regular plan grids and z-scored per file.
std::vector<net::TrainSequence> build_dataset(const std::vector<Conversation>& conversations,
                                              const std::vector<ModalityPlan>& plan,
                                              const Vocabulary& vocab,
                                              DatasetReport* report = nullptr);

// ---- Synthetic dyadic dialogs ----------------------------------------------

struct GeneratorConfig {
    double duration_s = 60.0;

    double turn_mean_s = 2.5;
    double turn_min_s = 0.5;
    double turn_max_s = 8.0;

    double gap_mean_s = 0.45;
    double gap_min_s = 0.08;
    double gap_max_s = 1.4;

    double overlap_prob = 0.08;  // exchange begins before the floor is free
    double overlap_mean_s = 0.15;
    double overlap_max_s = 0.30;

    // The turn-final token is the slow lexical cue: it decides whether the
    // floor changes hands.
    double p_cue = 0.5;
    double p_shift_cue = 0.9;
    double p_shift_nocue = 0.15;

    double word_min_s = 0.2;
    double word_max_s = 0.6;
    int vocab_fillers = 30;

    double backchannel_prob = 0.35;  // per sufficiently long turn

    bool gaze = false;  // 58Hz drift toward a yield value near turn ends
    double noise = 0.05;

    void validate() const;
};

Conversation synth_generate(const GeneratorConfig& config, Rng& rng);

}  // namespace turntaking::corpus
