#include "trendlab/model.hpp"

#include <cmath>
#include <stdexcept>

namespace trendlab {

DisentangleModel::DisentangleModel(ModelConfig cfg, LossWeights w, std::uint64_t seed)
    : weights(w), cfg_(cfg), dropout_rng_(sub_seed(seed, "dropout")) {
    Rng rng(sub_seed(seed, "init"));
    enc_e_gru = GRULayer(cfg.factors, cfg.hidden, rng);
    enc_e_mlp = MLPHead(cfg.hidden, cfg.mlp_hidden, cfg.feat, rng, cfg.bn_momentum, cfg.bn_eps);
    enc_m_gru = GRULayer(cfg.factors, cfg.hidden, rng);
    enc_m_mlp = MLPHead(cfg.hidden, cfg.mlp_hidden, cfg.feat, rng, cfg.bn_momentum, cfg.bn_eps);
    dec_gru = GRULayer(2 * cfg.feat, cfg.hidden, rng);
    dec_mlp = MLPHead(cfg.hidden, cfg.mlp_hidden, cfg.factors, rng, cfg.bn_momentum, cfg.bn_eps);
    pre_e = MLPHead(cfg.feat, cfg.mlp_hidden, 1, rng, cfg.bn_momentum, cfg.bn_eps);
    pre_m = MLPHead(cfg.feat, cfg.mlp_hidden, cfg.classes, rng, cfg.bn_momentum, cfg.bn_eps);
    adv_e = MLPHead(cfg.feat, cfg.mlp_hidden, 1, rng, cfg.bn_momentum, cfg.bn_eps);
    adv_m = MLPHead(cfg.feat, cfg.mlp_hidden, cfg.classes, rng, cfg.bn_momentum, cfg.bn_eps);
    dec_dropout.rate = cfg.dropout_rate;
}

DisentangleModel::Encoded DisentangleModel::encode(const std::vector<Tensor>& x_steps, Mode mode) {
    Encoded enc;
    enc.states_e = enc_e_gru.forward(x_steps);
    enc.states_m = enc_m_gru.forward(x_steps);
    enc.f_e = enc_e_mlp.forward(enc.states_e.back(), mode);
    enc.f_m = enc_m_mlp.forward(enc.states_m.back(), mode);
    return enc;
}

std::vector<Tensor> DisentangleModel::decode(const Tensor& f_e, const Tensor& f_m, int steps,
                                             Mode mode) {
    if (f_e.cols() != cfg_.feat || f_m.cols() != cfg_.feat) {
        throw ShapeError("decode: feature widths " + shape_str(f_e.shape()) + ", " +
                         shape_str(f_m.shape()) + " do not match configured width " +
                         std::to_string(cfg_.feat));
    }
    const Tensor joint = concat_cols(f_e, f_m);
    const std::vector<Tensor> inputs(static_cast<std::size_t>(steps), joint);
    const std::vector<Tensor> states = dec_gru.forward(inputs);
    std::vector<Tensor> outputs;
    outputs.reserve(states.size());
    for (const Tensor& h : states) {
        Tensor o = dec_mlp.forward(h, mode);
        outputs.push_back(dec_dropout.apply(o, mode, dropout_rng_));
    }
    return outputs;
}

DisentangleModel::ForwardResult DisentangleModel::forward_losses(const Batch& batch, Mode mode) {
    Encoded enc = encode(batch.x_steps, mode);

    Tensor pe = pre_e.forward(enc.f_e, mode);
    Tensor pm = pre_m.forward(enc.f_m, mode);
    // Adversarial heads see batch statistics but never update their running stats
    // outside their own step.
    const Mode adv_mode = mode == Mode::kTrain ? Mode::kTrainFrozenStats : mode;
    Tensor ae = adv_e.forward(enc.f_m, adv_mode);
    Tensor am = adv_m.forward(enc.f_e, adv_mode);

    Tensor l_pre = add(mse(pe, batch.y_e), cross_entropy(pm, batch.y_m));
    Tensor l_adv = add(mse(ae, batch.y_e), cross_entropy(am, batch.y_m));

    const std::vector<Tensor> recon = decode(enc.f_e, enc.f_m, static_cast<int>(batch.x_steps.size()), mode);
    Tensor rec_sum = mse(recon[0], batch.x_steps[0]);
    for (std::size_t t = 1; t < recon.size(); ++t) {
        rec_sum = add(rec_sum, mse(recon[t], batch.x_steps[t]));
    }
    Tensor l_rec = scale(rec_sum, 1.0 / static_cast<double>(recon.size()));

    Tensor l1 = add(l_pre, scale(l_adv, -weights.lambda));
    l1 = add(l1, scale(l_rec, weights.mu));

    ForwardResult res;
    res.report.l_pre = l_pre.item();
    res.report.l_adv = l_adv.item();
    res.report.l_rec = l_rec.item();

    if (batch.distill && weights.xi != 0.0) {
        Tensor l_dis = add(weighted_row_mse(enc.states_e.back(), batch.ht_e, batch.w_e),
                           weighted_row_mse(enc.states_m.back(), batch.ht_m, batch.w_m));
        l1 = add(l1, scale(l_dis, weights.xi));
        res.report.l_dis = l_dis.item();
    }

    res.l1 = l1;
    res.report.l1 = l1.item();
    res.report.l2 = res.report.l_adv;
    return res;
}

LossReport DisentangleModel::train_step_main(const Batch& batch, Adam& opt_main) {
    Graph tape;
    ForwardResult fwd = forward_losses(batch, Mode::kTrain);
    tape.backward(fwd.l1);
    opt_main.step();
    return fwd.report;
}

LossReport DisentangleModel::train_step_adv(const Batch& batch, Adam& opt_adv) {
    // Features are constants here: encoder gradients are never applied by this step,
    // so they are not computed at all.
    Tensor f_e, f_m;
    {
        Encoded enc = encode(batch.x_steps, Mode::kTrainFrozenStats);
        f_e = enc.f_e;
        f_m = enc.f_m;
    }
    Graph tape;
    Tensor ae = adv_e.forward(f_m, Mode::kTrain);
    Tensor am = adv_m.forward(f_e, Mode::kTrain);
    Tensor l2 = add(mse(ae, batch.y_e), cross_entropy(am, batch.y_m));
    tape.backward(l2);
    opt_adv.step();

    LossReport rep;
    rep.l_adv = l2.item();
    rep.l2 = rep.l_adv;
    return rep;
}

EvalOutputs DisentangleModel::eval_batch(const Batch& batch) {
    Encoded enc = encode(batch.x_steps, Mode::kEval);
    Tensor pe = pre_e.forward(enc.f_e, Mode::kEval);
    Tensor pm = softmax_rows(pre_m.forward(enc.f_m, Mode::kEval));
    Tensor ae = adv_e.forward(enc.f_m, Mode::kEval);
    Tensor am = softmax_rows(adv_m.forward(enc.f_e, Mode::kEval));

    EvalOutputs out;
    out.pre_e = pe.data();
    out.pre_m_probs = pm.data();
    out.adv_e = ae.data();
    out.adv_m_probs = am.data();
    out.last_e = enc.states_e.back().data();
    out.last_m = enc.states_m.back().data();
    return out;
}

NamedTensors DisentangleModel::named_tensors() const {
    std::vector<ParamEntry> entries;
    enc_e_gru.collect_params("enc_e.gru", entries);
    enc_e_mlp.collect_params("enc_e.mlp", entries);
    enc_m_gru.collect_params("enc_m.gru", entries);
    enc_m_mlp.collect_params("enc_m.mlp", entries);
    dec_gru.collect_params("dec.gru", entries);
    dec_mlp.collect_params("dec.mlp", entries);
    pre_e.collect_params("pre_e", entries);
    pre_m.collect_params("pre_m", entries);
    adv_e.collect_params("adv_e", entries);
    adv_m.collect_params("adv_m", entries);
    NamedTensors out;
    out.reserve(entries.size());
    for (auto& e : entries) out.emplace_back(std::move(e.name), e.tensor);
    return out;
}

std::vector<Tensor> DisentangleModel::main_params() const {
    std::vector<ParamEntry> entries;
    enc_e_gru.collect_params("enc_e.gru", entries);
    enc_e_mlp.collect_params("enc_e.mlp", entries);
    enc_m_gru.collect_params("enc_m.gru", entries);
    enc_m_mlp.collect_params("enc_m.mlp", entries);
    dec_gru.collect_params("dec.gru", entries);
    dec_mlp.collect_params("dec.mlp", entries);
    pre_e.collect_params("pre_e", entries);
    pre_m.collect_params("pre_m", entries);
    std::vector<Tensor> out;
    for (const auto& e : entries)
        if (e.trainable) out.push_back(e.tensor);
    return out;
}

std::vector<Tensor> DisentangleModel::adv_params() const {
    std::vector<ParamEntry> entries;
    adv_e.collect_params("adv_e", entries);
    adv_m.collect_params("adv_m", entries);
    std::vector<Tensor> out;
    for (const auto& e : entries)
        if (e.trainable) out.push_back(e.tensor);
    return out;
}

std::vector<Tensor> DisentangleModel::adv_owned() const {
    std::vector<ParamEntry> entries;
    adv_e.collect_params("adv_e", entries);
    adv_m.collect_params("adv_m", entries);
    std::vector<Tensor> out;
    for (const auto& e : entries) out.push_back(e.tensor);
    return out;
}

std::vector<std::vector<double>> DisentangleModel::snapshot() const {
    std::vector<std::vector<double>> snap;
    for (const auto& [name, t] : named_tensors()) snap.push_back(t.data());
    return snap;
}

void DisentangleModel::restore(const std::vector<std::vector<double>>& snap) {
    NamedTensors named = named_tensors();
    if (snap.size() != named.size()) throw std::invalid_argument("restore: snapshot size mismatch");
    for (std::size_t i = 0; i < named.size(); ++i) named[i].second.data() = snap[i];
}

void DisentangleModel::load_named(const NamedTensors& entries) {
    NamedTensors mine = named_tensors();
    for (auto& [name, t] : mine) {
        bool found = false;
        for (const auto& [oname, ot] : entries) {
            if (oname != name) continue;
            if (ot.shape() != t.shape()) {
                throw std::runtime_error("checkpoint: shape mismatch for " + name + ": " +
                                         shape_str(ot.shape()) + " vs " + shape_str(t.shape()));
            }
            t.data() = ot.data();
            found = true;
            break;
        }
        if (!found) throw std::runtime_error("checkpoint: missing entry " + name);
    }
}

// ---- GRU baseline ------------------------------------------------------------------

GruBaseline::GruBaseline(ModelConfig cfg, std::uint64_t seed) : cfg_(cfg) {
    Rng rng(sub_seed(seed, "init"));
    gru = GRULayer(cfg.factors, cfg.hidden, rng);
    head_e = MLPHead(cfg.hidden, cfg.mlp_hidden, 1, rng, cfg.bn_momentum, cfg.bn_eps);
    head_m = MLPHead(cfg.hidden, cfg.mlp_hidden, cfg.classes, rng, cfg.bn_momentum, cfg.bn_eps);
}

LossReport GruBaseline::train_step(const Batch& batch, Adam& opt) {
    Graph tape;
    const std::vector<Tensor> states = gru.forward(batch.x_steps);
    Tensor pe = head_e.forward(states.back(), Mode::kTrain);
    Tensor pm = head_m.forward(states.back(), Mode::kTrain);
    Tensor loss = add(mse(pe, batch.y_e), cross_entropy(pm, batch.y_m));
    tape.backward(loss);
    opt.step();

    LossReport rep;
    rep.l_pre = loss.item();
    rep.l1 = rep.l_pre;
    return rep;
}

EvalOutputs GruBaseline::eval_batch(const Batch& batch) {
    const std::vector<Tensor> states = gru.forward(batch.x_steps);
    Tensor pe = head_e.forward(states.back(), Mode::kEval);
    Tensor pm = softmax_rows(head_m.forward(states.back(), Mode::kEval));
    EvalOutputs out;
    out.pre_e = pe.data();
    out.pre_m_probs = pm.data();
    out.last_e = states.back().data();
    return out;
}

NamedTensors GruBaseline::named_tensors() const {
    std::vector<ParamEntry> entries;
    gru.collect_params("gru", entries);
    head_e.collect_params("head_e", entries);
    head_m.collect_params("head_m", entries);
    NamedTensors out;
    for (auto& e : entries) out.emplace_back(std::move(e.name), e.tensor);
    return out;
}

std::vector<Tensor> GruBaseline::trainable_params() const {
    std::vector<ParamEntry> entries;
    gru.collect_params("gru", entries);
    head_e.collect_params("head_e", entries);
    head_m.collect_params("head_m", entries);
    std::vector<Tensor> out;
    for (const auto& e : entries)
        if (e.trainable) out.push_back(e.tensor);
    return out;
}

std::vector<std::vector<double>> GruBaseline::snapshot() const {
    std::vector<std::vector<double>> snap;
    for (const auto& [name, t] : named_tensors()) snap.push_back(t.data());
    return snap;
}

void GruBaseline::restore(const std::vector<std::vector<double>>& snap) {
    NamedTensors named = named_tensors();
    if (snap.size() != named.size()) throw std::invalid_argument("restore: snapshot size mismatch");
    for (std::size_t i = 0; i < named.size(); ++i) named[i].second.data() = snap[i];
}

void GruBaseline::load_named(const NamedTensors& entries) {
    NamedTensors mine = named_tensors();
    for (auto& [name, t] : mine) {
        bool found = false;
        for (const auto& [oname, ot] : entries) {
            if (oname != name) continue;
            if (ot.shape() != t.shape()) {
                throw std::runtime_error("checkpoint: shape mismatch for " + name);
            }
            t.data() = ot.data();
            found = true;
            break;
        }
        if (!found) throw std::runtime_error("checkpoint: missing entry " + name);
    }
}

Batch make_batch(const std::vector<const StockSample*>& rows, int factors, int window) {
    Batch b;
    b.size = static_cast<int>(rows.size());
    if (rows.empty()) throw std::invalid_argument("make_batch: empty batch");

    b.x_steps.reserve(window);
    for (int t = 0; t < window; ++t) {
        Tensor step = Tensor::zeros({b.size, factors});
        for (int i = 0; i < b.size; ++i) {
            const StockSample& s = *rows[static_cast<std::size_t>(i)];
            for (int f = 0; f < factors; ++f) {
                step.data()[static_cast<std::size_t>(i) * factors + f] =
                    s.x[static_cast<std::size_t>(f) * window + t];
            }
        }
        b.x_steps.push_back(std::move(step));
    }

    Tensor y = Tensor::zeros({b.size, 1});
    b.y_m.resize(rows.size());
    for (int i = 0; i < b.size; ++i) {
        y.data()[static_cast<std::size_t>(i)] = rows[static_cast<std::size_t>(i)]->y_e;
        b.y_m[static_cast<std::size_t>(i)] = rows[static_cast<std::size_t>(i)]->y_m;
    }
    b.y_e = y;
    return b;
}

}  // namespace trendlab
