#include "turntaking/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace turntaking::eval {

namespace {

void check_labels(const FrameLabels& labels) {
    if (labels[0].size() != labels[1].size())
        throw DataError("frame label tracks differ in length");
    for (int s = 0; s < 2; ++s)
        for (int v : labels[s])
            if (v != 0 && v != 1) throw DataError("frame labels must be 0 or 1");
}

}  // namespace

std::vector<PauseEvent> find_pauses(const FrameLabels& labels, long long min_len_frames,
                                    long long window_frames) {
    if (min_len_frames < 1) throw ConfigError("pause length must be at least one frame");
    check_labels(labels);
    const auto& a = labels[0];
    const auto& b = labels[1];
    long long frames = static_cast<long long>(a.size());
    std::vector<PauseEvent> out;
    long long k = 0;
    while (k < frames) {
        if (a[k] || b[k]) {
            ++k;
            continue;
        }
        long long start = k;
        while (k < frames && !a[k] && !b[k]) ++k;
        long long len = k - start;
        if (start == 0) continue;
        bool holder_a = a[start - 1] == 1;
        bool holder_b = b[start - 1] == 1;
        if (holder_a == holder_b) continue;  // overlap resolution has no single holder
        if (len < min_len_frames) continue;
        long long decision = start + min_len_frames - 1;
        if (decision + window_frames >= frames) continue;
        bool starts_a = false, starts_b = false;
        for (long long j = decision + 1; j <= decision + window_frames; ++j) {
            starts_a = starts_a || a[j] == 1;
            starts_b = starts_b || b[j] == 1;
        }
        if (starts_a == starts_b) continue;  // nobody or both
        PauseEvent ev;
        ev.decision_frame = decision;
        ev.holder = holder_a ? 0 : 1;
        ev.continuer = starts_a ? 0 : 1;
        out.push_back(ev);
    }
    return out;
}

std::vector<OnsetEvent> find_onsets(const FrameLabels& labels) {
    check_labels(labels);
    long long frames = static_cast<long long>(labels[0].size());
    std::vector<OnsetEvent> out;
    for (int s = 0; s < 2; ++s) {
        const auto& lab = labels[s];
        long long k = 0;
        while (k < frames) {
            if (!lab[k]) {
                ++k;
                continue;
            }
            long long onset = k;
            while (k < frames && lab[k]) ++k;
            long long len = k - onset;
            bool truncated = k == frames;

            if (onset < kOnsetPreSilenceFrames) continue;
            bool silent_before = true;
            for (long long j = onset - kOnsetPreSilenceFrames; j < onset; ++j)
                silent_before = silent_before && lab[j] == 0;
            if (!silent_before) continue;
            if (len < kOnsetScorableMinFrames) continue;
            if (onset + kOnsetPredictionOffset >= frames) continue;

            OnsetEvent ev;
            ev.onset_frame = onset;
            ev.length_frames = len;
            ev.speaker = s;
            if (len >= kOnsetLongMinFrames) {
                ev.is_long = true;  // even truncated, the utterance is long
                out.push_back(ev);
            } else if (!truncated && len <= kOnsetShortMaxFrames) {
                if (onset + len + kOnsetShortSilenceFrames > frames) continue;
                bool silent_after = true;
                for (long long j = onset + len; j < onset + len + kOnsetShortSilenceFrames; ++j)
                    silent_after = silent_after && lab[j] == 0;
                if (!silent_after) continue;
                ev.is_long = false;
                out.push_back(ev);
            }
        }
    }
    std::sort(out.begin(), out.end(), [](const OnsetEvent& x, const OnsetEvent& y) {
        return x.onset_frame != y.onset_frame ? x.onset_frame < y.onset_frame
                                              : x.speaker < y.speaker;
    });
    return out;
}

double pause_score(const PredictionTrack& track, long long frame, int speaker,
                   long long window_frames) {
    if (speaker != 0 && speaker != 1) throw DataError("speaker index out of range");
    const auto& probs = track.speaker[speaker];
    if (frame < 0 || frame >= static_cast<long long>(probs.size()))
        throw DataError("decision frame outside the prediction track");
    const Vector& y = probs[frame];
    if (window_frames < 1 || window_frames > static_cast<long long>(y.size()))
        throw ConfigError("pause window exceeds the prediction horizon");
    double sum = 0.0;
    for (long long j = 0; j < window_frames; ++j) sum += y[j];
    return sum / static_cast<double>(window_frames);
}

int predict_pause(const PredictionTrack& track, const PauseEvent& ev, long long window_frames) {
    double s0 = pause_score(track, ev.decision_frame, 0, window_frames);
    double s1 = pause_score(track, ev.decision_frame, 1, window_frames);
    if (s0 > s1) return 0;
    if (s1 > s0) return 1;
    return ev.holder;
}

double onset_score(const PredictionTrack& track, const OnsetEvent& ev) {
    long long frame = ev.onset_frame + kOnsetPredictionOffset;
    const auto& probs = track.speaker[ev.speaker];
    if (frame < 0 || frame >= static_cast<long long>(probs.size()))
        throw DataError("onset prediction frame outside the prediction track");
    const Vector& y = probs[frame];
    if (y.empty()) throw DataError("empty prediction vector");
    double sum = 0.0;
    for (double v : y) sum += v;
    return sum / static_cast<double>(y.size());
}

F1Report fscore(const std::vector<std::array<int, 2>>& truth_pred) {
    if (truth_pred.empty()) throw DataError("no events to score");
    std::array<std::size_t, 2> tp = {0, 0}, fp = {0, 0}, fn = {0, 0}, support = {0, 0};
    for (const auto& [truth, pred] : truth_pred) {
        if ((truth != 0 && truth != 1) || (pred != 0 && pred != 1))
            throw DataError("classes must be 0 or 1");
        ++support[truth];
        if (truth == pred) {
            ++tp[truth];
        } else {
            ++fn[truth];
            ++fp[pred];
        }
    }
    F1Report rep;
    rep.n = truth_pred.size();
    for (int c = 0; c < 2; ++c) {
        ClassScore& cs = rep.cls[c];
        cs.support = support[c];
        std::size_t p_den = tp[c] + fp[c];
        std::size_t r_den = tp[c] + fn[c];
        cs.precision = p_den ? static_cast<double>(tp[c]) / static_cast<double>(p_den) : 0.0;
        cs.recall = r_den ? static_cast<double>(tp[c]) / static_cast<double>(r_den) : 0.0;
        cs.f1 = (cs.precision + cs.recall) > 0.0
                    ? 2.0 * cs.precision * cs.recall / (cs.precision + cs.recall)
                    : 0.0;
        rep.weighted_f1 +=
            (static_cast<double>(cs.support) / static_cast<double>(rep.n)) * cs.f1;
    }
    return rep;
}

F1Report majority_baseline(const std::vector<int>& truth) {
    if (truth.empty()) throw DataError("no events for the majority baseline");
    std::size_t ones = 0;
    for (int t : truth) {
        if (t != 0 && t != 1) throw DataError("classes must be 0 or 1");
        if (t == 1) ++ones;
    }
    int majority = 2 * ones > truth.size() ? 1 : 0;
    std::vector<std::array<int, 2>> pairs;
    pairs.reserve(truth.size());
    for (int t : truth) pairs.push_back({t, majority});
    return fscore(pairs);
}

double select_threshold(const std::vector<std::pair<double, int>>& score_truth) {
    if (score_truth.empty()) throw DataError("no events for threshold selection");
    double best_f1 = -1.0;
    double best_th = 0.0;
    for (int k = 0; k <= 100; ++k) {
        double th = static_cast<double>(k) / 100.0;
        std::vector<std::array<int, 2>> pairs;
        pairs.reserve(score_truth.size());
        for (const auto& [score, truth] : score_truth)
            pairs.push_back({truth, score >= th ? 1 : 0});
        double f1 = fscore(pairs).weighted_f1;
        if (f1 > best_f1) {
            best_f1 = f1;
            best_th = th;
        }
    }
    return best_th;
}

namespace {

// Continued fraction for the incomplete beta (Lentz's method).
double betacf(double a, double b, double x) {
    constexpr int kMaxIter = 300;
    constexpr double kEps = 3e-14;
    constexpr double kTiny = 1e-300;
    double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) return h;
    }
    throw NumericError("incomplete beta did not converge");
}

}  // namespace

double ibeta_reg(double a, double b, double x) {
    if (a <= 0.0 || b <= 0.0) throw NumericError("beta parameters must be positive");
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    double bt = std::exp(std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
                         b * std::log1p(-x));
    if (x < (a + 1.0) / (a + b + 2.0)) return bt * betacf(a, b, x) / a;
    return 1.0 - bt * betacf(b, a, 1.0 - x) / b;
}

double ttest_two_tailed(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() < 2 || b.size() < 2) throw DataError("t-test needs at least two samples per side");
    auto mean_var = [](const std::vector<double>& x) {
        double m = 0.0;
        for (double v : x) m += v;
        m /= static_cast<double>(x.size());
        double var = 0.0;
        for (double v : x) var += (v - m) * (v - m);
        var /= static_cast<double>(x.size() - 1);
        return std::pair<double, double>(m, var);
    };
    auto [ma, va] = mean_var(a);
    auto [mb, vb] = mean_var(b);
    double na = static_cast<double>(a.size());
    double nb = static_cast<double>(b.size());
    double sa = va / na, sb = vb / nb;
    double se2 = sa + sb;
    if (se2 <= 0.0) return ma == mb ? 1.0 : 0.0;
    double t = (ma - mb) / std::sqrt(se2);
    double df = se2 * se2 / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    double x = df / (df + t * t);
    double p = ibeta_reg(df / 2.0, 0.5, x);
    return std::min(1.0, std::max(0.0, p));
}

}  // namespace turntaking::eval
