#include "turntaking/network.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>

namespace turntaking::net {

namespace {

constexpr double kTimeEpsMs = 1e-6;

double ts_ms(const TimedInput& ev) { return ev.timestamp * 1000.0; }

std::size_t sum_master_in(const std::vector<ChannelSpec>& channels) {
    std::size_t s = 0;
    for (const ChannelSpec& ch : channels) s += ch.master_block_dim();
    return s;
}

void encode_event(const ModalityConfig& mod, const nn::EmbeddingTable& table,
                  const Vector& features, double* out, std::vector<long long>* ids) {
    if (features.size() != mod.feature_dim)
        throw DataError("modality " + mod.name + ": event carries " +
                        std::to_string(features.size()) + " features, expected " +
                        std::to_string(mod.feature_dim));
    if (!mod.embedded()) {
        std::copy(features.begin(), features.end(), out);
        return;
    }
    if (ids) ids->assign(mod.feature_dim, -1);
    for (std::size_t s = 0; s < mod.feature_dim; ++s) {
        const long long id = std::llround(features[s]);
        double* slot = out + s * mod.embed_dim;
        if (id < 0) {
            std::fill(slot, slot + mod.embed_dim, 0.0);
        } else {
            auto row = nn::embedding_lookup(table, static_cast<std::size_t>(id));
            std::copy(row.begin(), row.end(), slot);
            if (ids) (*ids)[s] = id;
        }
    }
}

}  // namespace

std::string to_string(Arrangement a) {
    switch (a) {
        case Arrangement::NoSubnets: return "no_subnets";
        case Arrangement::OneSubnet: return "one_subnet";
        case Arrangement::TwoSubnets: return "two_subnets";
    }
    throw ConfigError("unknown arrangement value");
}

Arrangement arrangement_from_string(const std::string& s) {
    if (s == "no_subnets") return Arrangement::NoSubnets;
    if (s == "one_subnet") return Arrangement::OneSubnet;
    if (s == "two_subnets") return Arrangement::TwoSubnets;
    throw ConfigError("unknown arrangement '" + s +
                      "' (expected no_subnets, one_subnet or two_subnets)");
}

std::size_t NetworkConfig::hidden_sum() const {
    std::size_t s = master_hidden;
    if (arrangement == Arrangement::OneSubnet) {
        if (!modalities.empty()) s += modalities[0].subnet_hidden;
    } else {
        for (const ModalityConfig& mod : modalities) s += mod.subnet_hidden;
    }
    return s;
}

void NetworkConfig::validate() const {
    if (master_hidden == 0) throw ConfigError("network: master_hidden must be positive");
    if (modalities.empty()) throw ConfigError("network: at least one modality required");
    if (dropout_p < 0.0 || dropout_p >= 1.0)
        throw ConfigError("network: dropout must be in [0, 1)");
    if (l2_lambda < 0.0) throw ConfigError("network: l2 must be non-negative");

    std::set<std::string> names;
    for (const ModalityConfig& mod : modalities) {
        if (mod.name.empty()) throw ConfigError("network: modality without a name");
        if (!names.insert(mod.name).second)
            throw ConfigError("network: duplicate modality name '" + mod.name + "'");
        if (mod.feature_dim == 0)
            throw ConfigError("modality " + mod.name + ": feature_dim must be positive");
        if (mod.embed_vocab > 0 && mod.embed_dim == 0)
            throw ConfigError("modality " + mod.name + ": embedding size must be positive");
        if (mod.embed_vocab == 0 && mod.embed_dim > 0)
            throw ConfigError("modality " + mod.name + ": embedding size given without a vocabulary");
        if (mod.timescale.is_regular()) {
            const long long p = mod.timescale.period_ms;
            if (p <= 0)
                throw ConfigError("modality " + mod.name + ": period must be positive");
            const bool fits = p <= kFrameMs ? (kFrameMs % p == 0) : (p % kFrameMs == 0);
            if (!fits)
                throw ConfigError("modality " + mod.name + ": period " + std::to_string(p) +
                                  "ms must divide or be a multiple of the 50ms frame");
        }
    }

    switch (arrangement) {
        case Arrangement::NoSubnets:
            for (const ModalityConfig& mod : modalities) {
                if (mod.subnet_hidden != 0)
                    throw ConfigError("no_subnets: modality " + mod.name +
                                      " must not declare a sub-network");
                if (!(mod.timescale == modalities[0].timescale))
                    throw ConfigError("no_subnets: all modalities must share one timescale");
            }
            break;
        case Arrangement::OneSubnet: {
            const std::size_t shared = modalities[0].subnet_hidden;
            if (shared == 0)
                throw ConfigError("one_subnet: sub-network size must be positive");
            for (const ModalityConfig& mod : modalities) {
                if (mod.subnet_hidden != shared)
                    throw ConfigError("one_subnet: all modalities share one sub-network size");
                if (!(mod.timescale == modalities[0].timescale))
                    throw ConfigError("one_subnet: all modalities must share one timescale");
            }
            if (!modalities[0].timescale.is_regular())
                throw ConfigError("one_subnet: the shared timescale must be regular");
            if (kFrameMs % modalities[0].timescale.period_ms != 0)
                throw ConfigError("one_subnet: the shared period must divide the 50ms frame");
            break;
        }
        case Arrangement::TwoSubnets:
            break;
    }

    if (hidden_budget_check && hidden_sum() > kHiddenBudget)
        throw ConfigError("network: hidden budget exceeded, master + sub-network units = " +
                          std::to_string(hidden_sum()) + " > " + std::to_string(kHiddenBudget));
}

std::vector<ChannelSpec> build_channels(const NetworkConfig& config) {
    config.validate();
    std::vector<ChannelSpec> out;
    auto layout = [&config](ChannelSpec& ch) {
        std::size_t off = 0;
        for (std::size_t mi : ch.modality_idx) {
            ch.block_offset.push_back(off);
            const std::size_t d = config.modalities[mi].encoded_dim();
            ch.block_dim.push_back(d);
            off += d;
        }
        ch.input_dim = off;
    };

    if (config.arrangement == Arrangement::OneSubnet) {
        ChannelSpec ch;
        ch.modality_idx.resize(config.modalities.size());
        std::iota(ch.modality_idx.begin(), ch.modality_idx.end(), 0);
        ch.subnet_hidden = config.modalities[0].subnet_hidden;
        ch.clock = config.modalities[0].timescale;
        ch.merged = true;
        layout(ch);
        out.push_back(std::move(ch));
    } else {
        for (std::size_t mi = 0; mi < config.modalities.size(); ++mi) {
            const ModalityConfig& mod = config.modalities[mi];
            ChannelSpec ch;
            ch.modality_idx = {mi};
            ch.subnet_hidden =
                config.arrangement == Arrangement::NoSubnets ? 0 : mod.subnet_hidden;
            ch.clock = mod.timescale;
            layout(ch);
            out.push_back(std::move(ch));
        }
    }
    return out;
}

NetworkParams::NetworkParams(NetworkConfig cfg)
    : config(std::move(cfg)),
      channels(build_channels(config)),
      master(sum_master_in(channels), config.master_hidden),
      head(kHorizon, config.master_hidden) {
    subnets.reserve(channels.size());
    for (const ChannelSpec& ch : channels)
        subnets.emplace_back(ch.is_subnet() ? nn::LstmParams(ch.input_dim, ch.subnet_hidden)
                                            : nn::LstmParams());
    embeddings.resize(config.modalities.size());
    for (std::size_t mi = 0; mi < config.modalities.size(); ++mi) {
        const ModalityConfig& mod = config.modalities[mi];
        if (mod.embedded()) embeddings[mi] = nn::EmbeddingTable(mod.embed_vocab, mod.embed_dim);
    }
}

void NetworkParams::init_weights(Rng& rng) {
    master.init_weights(rng);
    for (std::size_t ci = 0; ci < channels.size(); ++ci)
        if (channels[ci].is_subnet()) subnets[ci].init_weights(rng);
    head.init_weights(rng);
    for (std::size_t mi = 0; mi < config.modalities.size(); ++mi)
        if (config.modalities[mi].embedded()) embeddings[mi].init_weights(rng);
}

std::vector<TensorRef> NetworkParams::tensors() {
    std::vector<TensorRef> out;
    auto add_lstm = [&out](const std::string& base, nn::LstmParams& p) {
        out.push_back({base + ".W", p.W.values.data(), p.W.rows, p.W.cols});
        out.push_back({base + ".U", p.U.values.data(), p.U.rows, p.U.cols});
        out.push_back({base + ".b", p.b.data(), p.b.size(), 1});
    };
    add_lstm("master", master);
    for (std::size_t ci = 0; ci < channels.size(); ++ci) {
        if (!channels[ci].is_subnet()) continue;
        const std::string base =
            channels[ci].merged ? "subnet.shared"
                                : "subnet." + config.modalities[channels[ci].modality_idx[0]].name;
        add_lstm(base, subnets[ci]);
    }
    out.push_back({"head.W", head.W.values.data(), head.W.rows, head.W.cols});
    out.push_back({"head.b", head.b.data(), head.b.size(), 1});
    for (std::size_t mi = 0; mi < config.modalities.size(); ++mi) {
        if (!config.modalities[mi].embedded()) continue;
        Matrix& rows = embeddings[mi].rows;
        out.push_back({"embed." + config.modalities[mi].name, rows.values.data(), rows.rows,
                       rows.cols});
    }
    return out;
}

std::size_t NetworkParams::n_parameters() const {
    std::size_t s = master.W.size() + master.U.size() + master.b.size();
    for (std::size_t ci = 0; ci < channels.size(); ++ci)
        if (channels[ci].is_subnet())
            s += subnets[ci].W.size() + subnets[ci].U.size() + subnets[ci].b.size();
    s += head.W.size() + head.b.size();
    for (std::size_t mi = 0; mi < config.modalities.size(); ++mi)
        if (config.modalities[mi].embedded()) s += embeddings[mi].rows.size();
    return s;
}

std::size_t NetworkParams::master_input_dim() const { return sum_master_in(channels); }

GradStore make_grad_store(const NetworkParams& params) {
    GradStore grads(params.config);
    zero_grads(grads);
    return grads;
}

void zero_grads(GradStore& grads) {
    for (TensorRef& t : grads.tensors()) std::fill(t.data, t.data + t.size(), 0.0);
}

MultiscaleState make_state(const NetworkParams& params) {
    MultiscaleState st;
    st.master = nn::LstmState(params.config.master_hidden);
    st.channels.resize(params.channels.size());
    for (std::size_t ci = 0; ci < params.channels.size(); ++ci) {
        const ChannelSpec& spec = params.channels[ci];
        ChannelState& cs = st.channels[ci];
        if (spec.is_subnet()) cs.lstm = nn::LstmState(spec.subnet_hidden);
        cs.latch.assign(spec.master_block_dim(), 0.0);
        if (!spec.is_subnet()) {
            const ModalityConfig& mod = params.config.modalities[spec.modality_idx[0]];
            if (mod.embedded()) cs.latch_ids.assign(mod.feature_dim, -1);
        }
        if (spec.merged) {
            cs.held_enc.resize(spec.modality_idx.size());
            cs.held_ids.resize(spec.modality_idx.size());
            for (std::size_t b = 0; b < spec.modality_idx.size(); ++b) {
                cs.held_enc[b].assign(spec.block_dim[b], 0.0);
                const ModalityConfig& mod = params.config.modalities[spec.modality_idx[b]];
                if (mod.embedded()) cs.held_ids[b].assign(mod.feature_dim, -1);
            }
        }
    }
    st.cursors.assign(params.config.modalities.size(), 0);
    return st;
}

Vector master_step(const NetworkParams& params, MultiscaleState& state,
                   const std::vector<std::span<const TimedInput>>& events_in_interval,
                   bool train_mode, Rng* rng, MasterStepCache* cache) {
    const NetworkConfig& config = params.config;
    if (events_in_interval.size() != config.modalities.size())
        throw ConfigError("master_step: expected one event span per modality");
    const bool drop = train_mode && config.dropout_p > 0.0;
    if (drop && !rng) throw ConfigError("master_step: dropout needs an rng in training mode");

    const double t0_ms = static_cast<double>(state.tick) * kFrameMs;
    const double t1_ms = t0_ms + kFrameMs;
    for (std::size_t mi = 0; mi < events_in_interval.size(); ++mi) {
        for (const TimedInput& ev : events_in_interval[mi]) {
            const double t = ts_ms(ev);
            if (t <= t0_ms + kTimeEpsMs || t > t1_ms + kTimeEpsMs)
                throw DataError("modality " + config.modalities[mi].name + ": event at " +
                                std::to_string(ev.timestamp) + "s outside the step interval (" +
                                std::to_string(t0_ms / 1000.0) + ", " +
                                std::to_string(t1_ms / 1000.0) + "]");
        }
    }

    if (cache) cache->channels.assign(params.channels.size(), {});

    for (std::size_t ci = 0; ci < params.channels.size(); ++ci) {
        const ChannelSpec& spec = params.channels[ci];
        ChannelState& cs = state.channels[ci];
        ChannelStepCache* cc = cache ? &cache->channels[ci] : nullptr;

        if (!spec.is_subnet()) {
            // Direct route: the master samples the latest encoded event, held
            // across empty intervals.
            const std::size_t mi = spec.modality_idx[0];
            const ModalityConfig& mod = config.modalities[mi];
            const auto span = events_in_interval[mi];
            if (!span.empty())
                encode_event(mod, params.embeddings[mi], span.back().features, cs.latch.data(),
                             mod.embedded() ? &cs.latch_ids : nullptr);
            if (cc) cc->latch_ids = cs.latch_ids;
            continue;
        }

        if (!spec.merged) {
            // Own sub-network: one inner update per event, in order.
            const std::size_t mi = spec.modality_idx[0];
            const ModalityConfig& mod = config.modalities[mi];
            const auto span = events_in_interval[mi];
            for (const TimedInput& ev : span) {
                Vector x(spec.input_dim, 0.0);
                std::vector<long long> ids;
                encode_event(mod, params.embeddings[mi], ev.features, x.data(),
                             mod.embedded() ? &ids : nullptr);
                InnerStepCache* ic = nullptr;
                if (cc) {
                    cc->inner.emplace_back();
                    ic = &cc->inner.back();
                }
                cs.lstm = nn::lstm_forward(params.subnets[ci], x, cs.lstm, ic ? &ic->lstm : nullptr);
                if (ic) ic->block_ids.push_back(std::move(ids));
            }
            if (!span.empty()) cs.latch = cs.lstm.h;
            continue;
        }

        // Shared sub-network: walk the grid ticks inside this interval,
        // holding the latest event per modality across ticks without one.
        const long long p = spec.clock.period_ms;
        const long long lo = state.tick * kFrameMs;
        const long long first = lo / p + 1;
        const long long last = (lo + kFrameMs) / p;
        std::vector<std::size_t> local(spec.modality_idx.size(), 0);
        for (long long j = first; j <= last; ++j) {
            const double tau = static_cast<double>(j * p);
            for (std::size_t b = 0; b < spec.modality_idx.size(); ++b) {
                const std::size_t mi = spec.modality_idx[b];
                const ModalityConfig& mod = config.modalities[mi];
                const auto span = events_in_interval[mi];
                while (local[b] < span.size() && ts_ms(span[local[b]]) <= tau + kTimeEpsMs) {
                    encode_event(mod, params.embeddings[mi], span[local[b]].features,
                                 cs.held_enc[b].data(), mod.embedded() ? &cs.held_ids[b] : nullptr);
                    ++local[b];
                }
            }
            Vector x(spec.input_dim, 0.0);
            for (std::size_t b = 0; b < spec.modality_idx.size(); ++b)
                std::copy(cs.held_enc[b].begin(), cs.held_enc[b].end(),
                          x.begin() + spec.block_offset[b]);
            InnerStepCache* ic = nullptr;
            if (cc) {
                cc->inner.emplace_back();
                ic = &cc->inner.back();
            }
            cs.lstm = nn::lstm_forward(params.subnets[ci], x, cs.lstm, ic ? &ic->lstm : nullptr);
            if (ic) ic->block_ids = cs.held_ids;
        }
        if (last >= first) cs.latch = cs.lstm.h;
    }

    // Sample every channel's latch into the master input. Dropout acts on the
    // latched sub-network outputs and on the master output before the head.
    Vector input(params.master_input_dim(), 0.0);
    std::size_t off = 0;
    for (std::size_t ci = 0; ci < params.channels.size(); ++ci) {
        const ChannelSpec& spec = params.channels[ci];
        const Vector& latch = state.channels[ci].latch;
        const std::size_t w = spec.master_block_dim();
        if (spec.is_subnet() && drop) {
            Vector mask = nn::dropout_mask(w, config.dropout_p, *rng);
            for (std::size_t k = 0; k < w; ++k) input[off + k] = latch[k] * mask[k];
            if (cache) cache->channels[ci].dropout_mask = std::move(mask);
        } else {
            std::copy(latch.begin(), latch.end(), input.begin() + off);
        }
        off += w;
    }

    state.master =
        nn::lstm_forward(params.master, input, state.master, cache ? &cache->master_lstm : nullptr);
    Vector h_dropped = state.master.h;
    Vector h_mask;
    if (drop) {
        h_mask = nn::dropout_mask(config.master_hidden, config.dropout_p, *rng);
        for (std::size_t k = 0; k < h_dropped.size(); ++k) h_dropped[k] *= h_mask[k];
    }
    Vector y = nn::dense_sigmoid_forward(params.head, h_dropped);
    if (cache) {
        cache->master_input = std::move(input);
        cache->h_mask = std::move(h_mask);
        cache->h_dropped = std::move(h_dropped);
        cache->y = y;
    }
    ++state.tick;
    return y;
}

std::vector<Vector> run_sequence(const NetworkParams& params,
                                 const std::vector<std::vector<TimedInput>>& streams,
                                 std::size_t n_steps, bool train_mode, Rng* rng,
                                 std::vector<MasterStepCache>* caches, MultiscaleState& state) {
    const NetworkConfig& config = params.config;
    if (streams.size() != config.modalities.size())
        throw ConfigError("run_sequence: expected " + std::to_string(config.modalities.size()) +
                          " modality streams, got " + std::to_string(streams.size()));
    if (state.cursors.size() != streams.size())
        throw ConfigError("run_sequence: state does not belong to this network");

    std::vector<Vector> track;
    if (caches) caches->clear();
    if (n_steps == 0) return track;

    const double t_end_ms = static_cast<double>(state.tick + static_cast<long long>(n_steps)) *
                            static_cast<double>(kFrameMs);
    for (std::size_t mi = 0; mi < streams.size(); ++mi) {
        const ModalityConfig& mod = config.modalities[mi];
        if (!mod.timescale.is_regular()) continue;
        const double need = t_end_ms - static_cast<double>(mod.timescale.period_ms) - kTimeEpsMs;
        if (streams[mi].empty() || ts_ms(streams[mi].back()) <= need)
            throw DataError("modality " + mod.name + ": stream ends before the requested " +
                            std::to_string(t_end_ms / 1000.0) + "s horizon");
    }

    track.reserve(n_steps);
    if (caches) caches->reserve(n_steps);
    std::vector<std::span<const TimedInput>> spans(streams.size());
    for (std::size_t step = 0; step < n_steps; ++step) {
        const double t0 = static_cast<double>(state.tick) * kFrameMs;
        const double t1 = t0 + kFrameMs;
        for (std::size_t mi = 0; mi < streams.size(); ++mi) {
            const auto& stream = streams[mi];
            std::size_t& cur = state.cursors[mi];
            while (cur < stream.size() && ts_ms(stream[cur]) <= t0 + kTimeEpsMs) ++cur;
            std::size_t end = cur;
            double prev = -std::numeric_limits<double>::infinity();
            while (end < stream.size() && ts_ms(stream[end]) <= t1 + kTimeEpsMs) {
                const double t = ts_ms(stream[end]);
                if (t <= prev)
                    throw DataError("modality " + config.modalities[mi].name +
                                    ": timestamps must be strictly increasing near " +
                                    std::to_string(stream[end].timestamp) + "s");
                prev = t;
                ++end;
            }
            spans[mi] = std::span<const TimedInput>(stream.data() + cur, end - cur);
            cur = end;
        }
        MasterStepCache* mc = nullptr;
        if (caches) {
            caches->emplace_back();
            mc = &caches->back();
        }
        track.push_back(master_step(params, state, spans, train_mode, rng, mc));
    }
    return track;
}

namespace {
bool g_backward_fault = false;
}

void inject_backward_fault(bool on) { g_backward_fault = on; }

double backward_sequence(const NetworkParams& params, const std::vector<MasterStepCache>& caches,
                         std::span<const Vector> targets, GradStore& grads, int* clamp_count) {
    const std::size_t n = caches.size();
    if (targets.size() != n)
        throw ConfigError("backward_sequence: " + std::to_string(n) + " cached steps vs " +
                          std::to_string(targets.size()) + " targets");
    if (n == 0) return 0.0;
    const NetworkConfig& config = params.config;
    const double inv_n = 1.0 / static_cast<double>(n);

    nn::LstmState d_master(config.master_hidden);
    std::vector<nn::LstmState> d_sub(params.channels.size());
    for (std::size_t ci = 0; ci < params.channels.size(); ++ci)
        if (params.channels[ci].is_subnet())
            d_sub[ci] = nn::LstmState(params.channels[ci].subnet_hidden);

    double total = 0.0;
    Vector d_input, d_x;
    for (std::size_t k = n; k-- > 0;) {
        const MasterStepCache& mc = caches[k];
        auto bce = nn::bce_loss(mc.y, targets[k]);
        total += bce.loss;
        if (clamp_count) *clamp_count += bce.clamped;
        for (double& g : bce.grad_y) g *= inv_n;

        Vector dh =
            nn::dense_sigmoid_backward(params.head, mc.h_dropped, mc.y, bce.grad_y, grads.head);
        if (!mc.h_mask.empty())
            for (std::size_t j = 0; j < dh.size(); ++j) dh[j] *= mc.h_mask[j];
        for (std::size_t j = 0; j < dh.size(); ++j) dh[j] += d_master.h[j];

        d_master = nn::lstm_backward(params.master, mc.master_lstm, dh, d_master.c, grads.master,
                                     d_input);

        // The latch gradient joins each sub-network's pending state gradient;
        // held intervals pass it along untouched.
        std::size_t off = 0;
        for (std::size_t ci = 0; ci < params.channels.size(); ++ci) {
            const ChannelSpec& spec = params.channels[ci];
            const ChannelStepCache& cc = mc.channels[ci];
            const std::size_t w = spec.master_block_dim();
            const double* dblk = d_input.data() + off;
            if (spec.is_subnet()) {
                Vector& dh_sub = d_sub[ci].h;
                if (!cc.dropout_mask.empty())
                    for (std::size_t j = 0; j < w; ++j) dh_sub[j] += dblk[j] * cc.dropout_mask[j];
                else
                    for (std::size_t j = 0; j < w; ++j) dh_sub[j] += dblk[j];
            } else {
                const std::size_t mi = spec.modality_idx[0];
                const ModalityConfig& mod = config.modalities[mi];
                if (mod.embedded() && !cc.latch_ids.empty()) {
                    for (std::size_t s = 0; s < mod.feature_dim; ++s) {
                        const long long id = cc.latch_ids[s];
                        if (id < 0) continue;
                        double* row = grads.embeddings[mi].rows.row(static_cast<std::size_t>(id));
                        const double* g = dblk + s * mod.embed_dim;
                        for (std::size_t d = 0; d < mod.embed_dim; ++d) row[d] += g[d];
                    }
                }
            }
            off += w;
        }

        for (std::size_t ci = 0; ci < params.channels.size(); ++ci) {
            const ChannelSpec& spec = params.channels[ci];
            if (!spec.is_subnet()) continue;
            const ChannelStepCache& cc = mc.channels[ci];
            for (std::size_t u = cc.inner.size(); u-- > 0;) {
                const InnerStepCache& ic = cc.inner[u];
                d_sub[ci] = nn::lstm_backward(params.subnets[ci], ic.lstm, d_sub[ci].h,
                                              d_sub[ci].c, grads.subnets[ci], d_x);
                for (std::size_t b = 0; b < spec.modality_idx.size(); ++b) {
                    const std::size_t mi = spec.modality_idx[b];
                    const ModalityConfig& mod = config.modalities[mi];
                    if (!mod.embedded()) continue;
                    const std::vector<long long>& ids = ic.block_ids[b];
                    if (ids.empty()) continue;
                    for (std::size_t s = 0; s < ids.size(); ++s) {
                        if (ids[s] < 0) continue;
                        double* row =
                            grads.embeddings[mi].rows.row(static_cast<std::size_t>(ids[s]));
                        const double* g = d_x.data() + spec.block_offset[b] + s * mod.embed_dim;
                        for (std::size_t d = 0; d < mod.embed_dim; ++d) row[d] += g[d];
                    }
                }
            }
        }
    }
    if (g_backward_fault && !grads.master.W.values.empty()) grads.master.W.values[0] += 1e-2;
    return total * inv_n;
}

TrainResult train(NetworkParams& params, const std::vector<TrainSequence>& dataset,
                  const TrainOptions& options) {
    if (options.t_bptt <= 0) throw ConfigError("train: t_bptt must be positive");
    TrainResult result;
    Rng rng(options.seed);
    nn::AdamState adam;
    adam.lr = options.learning_rate;
    adam.init_like(params.tensors());

    GradStore grads = make_grad_store(params);
    std::vector<MasterStepCache> caches;
    const std::size_t seg = static_cast<std::size_t>(options.t_bptt);

    for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
        std::vector<std::size_t> order(dataset.size());
        std::iota(order.begin(), order.end(), 0);
        for (std::size_t j = order.size(); j > 1; --j)
            std::swap(order[j - 1], order[rng.below(j)]);

        double loss_sum = 0.0;
        std::size_t frames = 0;
        for (std::size_t idx : order) {
            const TrainSequence& seq = dataset[idx];
            const std::size_t n = seq.n_steps();
            MultiscaleState state = make_state(params);
            for (std::size_t start = 0; start < n; start += seg) {
                const std::size_t len = std::min(seg, n - start);
                run_sequence(params, seq.streams, len, true, &rng, &caches, state);
                zero_grads(grads);
                int clamps = 0;
                const double loss = backward_sequence(
                    params, caches, {seq.targets.data() + start, len}, grads, &clamps);
                result.clamp_events += clamps;
                if (!std::isfinite(loss))
                    throw NumericError("train: loss diverged on sequence " + seq.id);
                nn::adam_step(params.tensors(), grads.tensors(), adam, params.config.l2_lambda);
                loss_sum += loss * static_cast<double>(len);
                frames += len;
            }
        }
        result.epoch_loss.push_back(frames ? loss_sum / static_cast<double>(frames) : 0.0);
    }
    return result;
}

// ---- Checkpoint ------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'M', 'S', 'T', 'T', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kCkptVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void put_u64(std::ostream& os, std::uint64_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void put_f64(std::ostream& os, double v) { os.write(reinterpret_cast<const char*>(&v), sizeof v); }
void put_str(std::ostream& os, const std::string& s) {
    put_u32(os, static_cast<std::uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::uint32_t get_u32(std::istream& is) {
    std::uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!is) throw DataError("checkpoint: truncated file");
    return v;
}
std::uint64_t get_u64(std::istream& is) {
    std::uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!is) throw DataError("checkpoint: truncated file");
    return v;
}
double get_f64(std::istream& is) {
    double v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!is) throw DataError("checkpoint: truncated file");
    return v;
}
std::string get_str(std::istream& is) {
    const std::uint32_t n = get_u32(is);
    if (n > (1u << 24)) throw DataError("checkpoint: implausible string length");
    std::string s(n, '\0');
    is.read(s.data(), n);
    if (!is) throw DataError("checkpoint: truncated file");
    return s;
}

}  // namespace

void write_checkpoint(const std::string& path, const std::string& config_echo,
                      const std::vector<std::pair<std::string, double>>& scalars,
                      NetworkParams& params) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("checkpoint: cannot open " + path + " for writing");
    os.write(kMagic, sizeof kMagic);
    put_u32(os, kCkptVersion);
    put_str(os, config_echo);
    put_u32(os, static_cast<std::uint32_t>(scalars.size()));
    for (const auto& [name, value] : scalars) {
        put_str(os, name);
        put_f64(os, value);
    }
    auto tensors = params.tensors();
    put_u32(os, static_cast<std::uint32_t>(tensors.size()));
    for (const TensorRef& t : tensors) {
        put_str(os, t.name);
        put_u64(os, t.rows);
        put_u64(os, t.cols);
        os.write(reinterpret_cast<const char*>(t.data),
                 static_cast<std::streamsize>(t.size() * sizeof(double)));
    }
    if (!os) throw DataError("checkpoint: write failed for " + path);
}

RawCheckpoint read_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("checkpoint: cannot open " + path);
    char magic[8] = {};
    is.read(magic, sizeof magic);
    if (!is || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
        throw DataError("checkpoint: bad magic in " + path);
    const std::uint32_t version = get_u32(is);
    if (version != kCkptVersion)
        throw DataError("checkpoint: unsupported version " + std::to_string(version));

    RawCheckpoint out;
    out.config_echo = get_str(is);
    const std::uint32_t n_scalars = get_u32(is);
    for (std::uint32_t k = 0; k < n_scalars; ++k) {
        std::string name = get_str(is);
        const double value = get_f64(is);
        out.scalars.emplace_back(std::move(name), value);
    }
    const std::uint32_t n_tensors = get_u32(is);
    for (std::uint32_t k = 0; k < n_tensors; ++k) {
        std::string name = get_str(is);
        const std::uint64_t rows = get_u64(is);
        const std::uint64_t cols = get_u64(is);
        if (rows * cols > (1ull << 30))
            throw DataError("checkpoint: implausible tensor size for " + name);
        Matrix m(static_cast<std::size_t>(rows), static_cast<std::size_t>(cols));
        is.read(reinterpret_cast<char*>(m.values.data()),
                static_cast<std::streamsize>(m.size() * sizeof(double)));
        if (!is) throw DataError("checkpoint: truncated tensor data for " + name);
        out.tensors.emplace_back(std::move(name), std::move(m));
    }
    return out;
}

void apply_checkpoint(const RawCheckpoint& ckpt, NetworkParams& params) {
    auto tensors = params.tensors();
    if (ckpt.tensors.size() != tensors.size())
        throw DataError("checkpoint: holds " + std::to_string(ckpt.tensors.size()) +
                        " tensors, network expects " + std::to_string(tensors.size()));
    for (std::size_t k = 0; k < tensors.size(); ++k) {
        const auto& [name, m] = ckpt.tensors[k];
        TensorRef& t = tensors[k];
        if (name != t.name || m.rows != t.rows || m.cols != t.cols)
            throw DataError("checkpoint: tensor " + name + " does not match network tensor " +
                            t.name);
        std::copy(m.values.begin(), m.values.end(), t.data);
    }
}

}  // namespace turntaking::net
