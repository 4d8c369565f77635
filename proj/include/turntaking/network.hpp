#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "turntaking/nn.hpp"

namespace turntaking::net {

// Master clock: one prediction every 50ms, 60 future frames per prediction.
inline constexpr long long kFrameMs = 50;
inline constexpr std::size_t kHorizon = 60;

struct Timescale {
    enum class Kind { Regular, Asynchronous };
    Kind kind = Kind::Regular;
    long long period_ms = kFrameMs;  // regular only

    static Timescale regular(long long ms) { return {Kind::Regular, ms}; }
    static Timescale asynchronous() { return {Kind::Asynchronous, 0}; }

    bool is_regular() const { return kind == Kind::Regular; }
    bool operator==(const Timescale& o) const {
        return kind == o.kind && (kind == Kind::Asynchronous || period_ms == o.period_ms);
    }
};

// One input modality. feature_dim counts the raw slots carried by each event;
// with embed_vocab > 0 each slot is a vocabulary index (-1 = absent, encoded
// as a zero block) and the effective input is feature_dim * embed_dim wide.
// subnet_hidden == 0 routes the modality straight into the master input.
struct ModalityConfig {
    std::string name;
    std::size_t feature_dim = 0;
    Timescale timescale;
    std::size_t subnet_hidden = 0;
    std::size_t embed_vocab = 0;
    std::size_t embed_dim = 0;

    bool embedded() const { return embed_vocab > 0; }
    std::size_t encoded_dim() const { return embedded() ? feature_dim * embed_dim : feature_dim; }
};

enum class Arrangement { NoSubnets, OneSubnet, TwoSubnets };

std::string to_string(Arrangement a);
Arrangement arrangement_from_string(const std::string& s);

inline constexpr std::size_t kHiddenBudget = 150;

struct NetworkConfig {
    Arrangement arrangement = Arrangement::NoSubnets;
    std::vector<ModalityConfig> modalities;
    std::size_t master_hidden = 0;
    double dropout_p = 0.0;
    double l2_lambda = 0.0;
    bool hidden_budget_check = true;

    void validate() const;  // throws ConfigError
    std::size_t hidden_sum() const;
};

// One timed observation on a modality stream. Features are raw values, or
// vocabulary indices (-1 = absent) when the modality is embedded.
struct TimedInput {
    double timestamp = 0.0;  // seconds
    Vector features;
};

// A channel is what the master actually samples: a per-modality subnet, the
// single shared subnet over all modalities, or a direct (no-subnet) route.
struct ChannelSpec {
    std::vector<std::size_t> modality_idx;
    std::size_t subnet_hidden = 0;  // 0 = direct
    Timescale clock;
    bool merged = false;  // shared subnet stepping on its own grid
    std::size_t input_dim = 0;
    std::vector<std::size_t> block_offset;  // per modality block within the channel input
    std::vector<std::size_t> block_dim;

    bool is_subnet() const { return subnet_hidden > 0; }
    std::size_t master_block_dim() const { return is_subnet() ? subnet_hidden : input_dim; }
};

std::vector<ChannelSpec> build_channels(const NetworkConfig& config);

struct NetworkParams {
    NetworkConfig config;
    std::vector<ChannelSpec> channels;
    nn::LstmParams master;
    std::vector<nn::LstmParams> subnets;          // parallel to channels, empty when direct
    nn::DenseSigmoidParams head;                  // kHorizon x master_hidden
    std::vector<nn::EmbeddingTable> embeddings;   // parallel to modalities, empty when raw

    explicit NetworkParams(NetworkConfig cfg);

    void init_weights(Rng& rng);
    std::vector<TensorRef> tensors();  // fixed enumeration order
    std::size_t n_parameters() const;
    std::size_t master_input_dim() const;
};

// Gradient accumulator shaped exactly like a parameter set.
using GradStore = NetworkParams;

GradStore make_grad_store(const NetworkParams& params);
void zero_grads(GradStore& grads);

struct ChannelState {
    nn::LstmState lstm;                         // subnet channels
    Vector latch;                               // value the master samples
    std::vector<long long> latch_ids;           // ids behind a direct embedded latch
    std::vector<Vector> held_enc;               // merged channels: per-modality held block
    std::vector<std::vector<long long>> held_ids;
};

struct MultiscaleState {
    long long tick = 0;  // master steps taken; next interval is (tick*50ms, tick*50ms+50ms]
    nn::LstmState master;
    std::vector<ChannelState> channels;
    std::vector<std::size_t> cursors;  // per-modality stream positions for run_sequence
};

MultiscaleState make_state(const NetworkParams& params);

struct InnerStepCache {
    nn::LstmStepCache lstm;
    std::vector<std::vector<long long>> block_ids;  // per modality block, empty when raw
};

struct ChannelStepCache {
    std::vector<InnerStepCache> inner;   // subnet channels
    std::vector<long long> latch_ids;    // direct channels: ids behind the latch used this step
    Vector dropout_mask;                 // mask on the latched subnet output (empty = identity)
};

struct MasterStepCache {
    std::vector<ChannelStepCache> channels;
    Vector master_input;  // post-dropout concatenation fed to the master cell
    nn::LstmStepCache master_lstm;
    Vector h_mask;        // mask on the master output before the head (empty = identity)
    Vector h_dropped;     // head input
    Vector y;
};

// One master tick over the events of the current 50ms interval.
// events_in_interval holds one span per modality (config order), each sorted
// by timestamp and lying in (tick*50ms, tick*50ms+50ms].
Vector master_step(const NetworkParams& params, MultiscaleState& state,
                   const std::vector<std::span<const TimedInput>>& events_in_interval,
                   bool train_mode, Rng* rng, MasterStepCache* cache);

// Runs n_steps master ticks, walking the per-modality streams via the state's
// cursors. Fresh state when state->tick == 0; pass the same state again to
// continue (as truncated-BPTT training does). caches is filled in train mode.
std::vector<Vector> run_sequence(const NetworkParams& params,
                                 const std::vector<std::vector<TimedInput>>& streams,
                                 std::size_t n_steps, bool train_mode, Rng* rng,
                                 std::vector<MasterStepCache>* caches, MultiscaleState& state);

// Test hook: corrupts one master gradient entry so a finite-difference sweep
// has a planted fault to catch.
void inject_backward_fault(bool on);

// BPTT over one cached segment; gradients stop at the segment boundary.
// Returns the mean BCE over the segment's frames.
double backward_sequence(const NetworkParams& params, const std::vector<MasterStepCache>& caches,
                         std::span<const Vector> targets, GradStore& grads,
                         int* clamp_count = nullptr);

struct TrainSequence {
    std::string id;
    std::vector<std::vector<TimedInput>> streams;  // per modality, config order
    std::vector<Vector> targets;                   // per master step, kHorizon binaries

    std::size_t n_steps() const { return targets.size(); }
};

struct TrainOptions {
    std::size_t epochs = 1;
    long long t_bptt = 100;  // master steps per truncated-BPTT segment
    double learning_rate = 1e-3;
    std::uint64_t seed = 1;
};

struct TrainResult {
    std::vector<double> epoch_loss;  // mean BCE per epoch
    long long clamp_events = 0;
};

// Shuffles sequence order per epoch, applies dropout in training mode only,
// and takes one Adam step per T_bptt segment. Aborts on divergence.
TrainResult train(NetworkParams& params, const std::vector<TrainSequence>& dataset,
                  const TrainOptions& options);

// ---- Checkpoint container ------------------------------------------------
// Binary, versioned; doubles stored raw so 64-bit round trips are bit-exact.

struct RawCheckpoint {
    std::string config_echo;
    std::vector<std::pair<std::string, double>> scalars;
    std::vector<std::pair<std::string, Matrix>> tensors;
};

void write_checkpoint(const std::string& path, const std::string& config_echo,
                      const std::vector<std::pair<std::string, double>>& scalars,
                      NetworkParams& params);

RawCheckpoint read_checkpoint(const std::string& path);

// Copies checkpoint tensors into params, matching by name and shape.
void apply_checkpoint(const RawCheckpoint& ckpt, NetworkParams& params);

}  // namespace turntaking::net
