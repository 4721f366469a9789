#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "trendlab/data.hpp"
#include "trendlab/nn.hpp"
#include "trendlab/tensor.hpp"

namespace trendlab {

struct ModelConfig {
    int factors = 6;
    int window = 60;
    int hidden = 64;      // GRU hidden size
    int feat = 64;        // disentangled feature width (encoder MLP output)
    int mlp_hidden = 64;  // hidden width of every MLP head
    int classes = 3;
    double dropout_rate = 0.5;  // decoder output dropout
    double bn_momentum = 0.9;
    double bn_eps = 1e-5;
};

// Loss weights of the combined objective
//   l1 = l_pre - lambda * l_adv + mu * l_rec (+ xi * l_dis)
//   l2 = l_adv
struct LossWeights {
    double lambda = 0.4;
    double mu = 0.05;
    double xi = 0.8;
};

// One training batch. x_steps hold the window as per-step (batch x factors) constants;
// distillation fields are populated only while a teacher is active (weight 0 marks
// samples without a teacher trace, e.g. augmented ones).
struct Batch {
    int size = 0;
    std::vector<Tensor> x_steps;
    Tensor y_e;  // (batch x 1)
    std::vector<int> y_m;
    bool distill = false;
    Tensor ht_e, ht_m;             // teacher last-step states, (batch x hidden)
    std::vector<double> w_e, w_m;  // knowledge weights per sample
};

// Per-batch loss values. Main steps fill every field (l2 == l_adv by definition);
// adversary steps fill l_adv/l2 only.
struct LossReport {
    double l_pre = 0.0;
    double l_adv = 0.0;
    double l_rec = 0.0;
    std::optional<double> l_dis;
    double l1 = 0.0;
    double l2 = 0.0;
};

// Per-sample evaluation-mode outputs.
struct EvalOutputs {
    std::vector<double> pre_e;        // batch
    std::vector<double> pre_m_probs;  // batch x 3
    std::vector<double> adv_e;
    std::vector<double> adv_m_probs;
    std::vector<double> last_e, last_m;  // batch x hidden, encoder last GRU states
};

// The disentanglement network: two GRU+MLP encoders, a reconstructive GRU decoder fed
// the concatenated features at every step, two return predictors and two adversarial
// predictors. Parameter partitions are disjoint; the main step updates
// encoders+decoder+predictors, the adversary step updates the adversarial heads only.
class DisentangleModel {
public:
    DisentangleModel(ModelConfig cfg, LossWeights weights, std::uint64_t seed);

    struct Encoded {
        Tensor f_e, f_m;
        std::vector<Tensor> states_e, states_m;
    };

    Encoded encode(const std::vector<Tensor>& x_steps, Mode mode);
    // Reconstruction steps; the concatenated feature vector is the input at all steps.
    std::vector<Tensor> decode(const Tensor& f_e, const Tensor& f_m, int steps, Mode mode);

    // Forward + all loss components on the active tape.
    struct ForwardResult {
        Tensor l1;
        LossReport report;
    };
    ForwardResult forward_losses(const Batch& batch, Mode mode);

    LossReport train_step_main(const Batch& batch, Adam& opt_main);
    LossReport train_step_adv(const Batch& batch, Adam& opt_adv);

    EvalOutputs eval_batch(const Batch& batch);

    NamedTensors named_tensors() const;       // parameters + batchnorm buffers
    std::vector<Tensor> main_params() const;  // theta_Enc + theta_Dec + theta_Pre
    std::vector<Tensor> adv_params() const;   // theta_Adv
    std::vector<Tensor> adv_owned() const;    // adv params + adv batchnorm buffers

    std::vector<std::vector<double>> snapshot() const;
    void restore(const std::vector<std::vector<double>>& snap);
    void load_named(const NamedTensors& entries);

    const ModelConfig& config() const { return cfg_; }
    LossWeights weights;

    GRULayer enc_e_gru, enc_m_gru, dec_gru;
    MLPHead enc_e_mlp, enc_m_mlp, dec_mlp, pre_e, pre_m, adv_e, adv_m;
    Dropout dec_dropout;

private:
    ModelConfig cfg_;
    Rng dropout_rng_;
};

// Plain GRU baseline: one encoder, an excess regression head and a market
// classification head, trained jointly on MSE + CE without any adversary or decoder.
class GruBaseline {
public:
    GruBaseline(ModelConfig cfg, std::uint64_t seed);

    LossReport train_step(const Batch& batch, Adam& opt);
    EvalOutputs eval_batch(const Batch& batch);

    NamedTensors named_tensors() const;
    std::vector<Tensor> trainable_params() const;
    std::vector<std::vector<double>> snapshot() const;
    void restore(const std::vector<std::vector<double>>& snap);
    void load_named(const NamedTensors& entries);

    const ModelConfig& config() const { return cfg_; }

    GRULayer gru;
    MLPHead head_e, head_m;

private:
    ModelConfig cfg_;
};

// Builds the per-step constant tensors for the given rows (distill fields left empty).
Batch make_batch(const std::vector<const StockSample*>& rows, int factors, int window);

}  // namespace trendlab
