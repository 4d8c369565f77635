#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "turntaking/matrix.hpp"

namespace turntaking::eval {

// All extraction works on 50ms frame labels.
inline constexpr long long kPauseWindowFrames = 20;        // 1s continuation window
inline constexpr long long kOnsetPreSilenceFrames = 30;    // 1.5s own silence before onset
inline constexpr long long kOnsetShortMaxFrames = 20;      // short utterance <= 1s
inline constexpr long long kOnsetShortSilenceFrames = 100; // followed by >= 5s own silence
inline constexpr long long kOnsetLongMinFrames = 50;       // long utterance >= 2.5s
inline constexpr long long kOnsetScorableMinFrames = 10;   // >= 500ms of speech
inline constexpr long long kOnsetPredictionOffset = 10;    // scored 500ms after onset

using FrameLabels = std::array<std::vector<int>, 2>;

// Classes: pauses use 0 = hold, 1 = shift; onsets use 0 = short, 1 = long.
inline constexpr int kHold = 0;
inline constexpr int kShift = 1;
inline constexpr int kShort = 0;
inline constexpr int kLong = 1;

struct PauseEvent {
    long long decision_frame = 0;  // last frame of the qualifying silence
    int holder = 0;
    int continuer = 0;
    int truth() const { return continuer == holder ? kHold : kShift; }
};

struct OnsetEvent {
    long long onset_frame = 0;
    long long length_frames = 0;
    int speaker = 0;
    bool is_long = false;
    int truth() const { return is_long ? kLong : kShort; }
};

// A pause is a maximal joint silence directly after speech by exactly one
// speaker; it produces an event once it reaches min_len_frames, kept only
// when exactly one speaker speaks inside the following window.
std::vector<PauseEvent> find_pauses(const FrameLabels& labels, long long min_len_frames,
                                    long long window_frames = kPauseWindowFrames);

// A scorable onset starts an utterance of >= 500ms after >= 1.5s of the
// speaker's own silence. Short: <= 1s of speech followed by >= 5s own
// silence. Long: >= 2.5s of speech. Anything between is discarded.
std::vector<OnsetEvent> find_onsets(const FrameLabels& labels);

// Model outputs: per perspective, one future-window probability vector per
// frame.
struct PredictionTrack {
    std::array<std::vector<Vector>, 2> speaker;
};

// Mean of the first window_frames probabilities at the decision frame.
double pause_score(const PredictionTrack& track, long long frame, int speaker,
                   long long window_frames = kPauseWindowFrames);

// Predicted continuer; an exact tie backs the holder.
int predict_pause(const PredictionTrack& track, const PauseEvent& ev,
                  long long window_frames = kPauseWindowFrames);

// Mean of the full window at onset + 500ms, from the onset speaker's
// perspective.
double onset_score(const PredictionTrack& track, const OnsetEvent& ev);

struct ClassScore {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t support = 0;
};

struct F1Report {
    std::array<ClassScore, 2> cls;
    double weighted_f1 = 0.0;
    std::size_t n = 0;
};

// Prevalence-weighted F1 over the two classes; pairs are (truth, predicted).
F1Report fscore(const std::vector<std::array<int, 2>>& truth_pred);

// Always predicts the majority truth class (ties pick class 0).
F1Report majority_baseline(const std::vector<int>& truth);

// Sweeps thresholds 0.00, 0.01, ..., 1.00; predicted long iff score >=
// threshold; returns the weighted-F1 argmax, lowest threshold on ties.
double select_threshold(const std::vector<std::pair<double, int>>& score_truth);

// Welch's two-sample two-tailed t-test p-value.
double ttest_two_tailed(const std::vector<double>& a, const std::vector<double>& b);

// Regularized incomplete beta, exposed for verification.
double ibeta_reg(double a, double b, double x);

}  // namespace turntaking::eval
