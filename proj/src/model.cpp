#include "hcpo/model.hpp"

#include <cmath>
#include <stdexcept>

namespace hcpo {

namespace {

constexpr double kLnEps = 1e-5;
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)

double gelu(double x) {
    double t = kGeluC * (x + 0.044715 * x * x * x);
    return 0.5 * x * (1.0 + std::tanh(t));
}

double dgelu(double x) {
    double t = kGeluC * (x + 0.044715 * x * x * x);
    double th = std::tanh(t);
    double dt = kGeluC * (1.0 + 3.0 * 0.044715 * x * x);
    return 0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * dt;
}

// y = xhat .* g + b with xhat = (x - mean) * inv_std, rowwise
void layer_norm(const MatrixXd& x, const VectorXd& g, const VectorXd& b, MatrixXd& xhat,
                VectorXd& inv_std, MatrixXd& y) {
    const long n = x.rows(), d = x.cols();
    xhat.resize(n, d);
    inv_std.resize(n);
    y.resize(n, d);
    for (long i = 0; i < n; ++i) {
        double mean = x.row(i).mean();
        double var = (x.row(i).array() - mean).square().mean();
        double is = 1.0 / std::sqrt(var + kLnEps);
        inv_std(i) = is;
        xhat.row(i) = (x.row(i).array() - mean) * is;
        y.row(i) = xhat.row(i).array() * g.transpose().array() + b.transpose().array();
    }
}

MatrixXd layer_norm_backward(const MatrixXd& xhat, const VectorXd& inv_std, const VectorXd& g,
                             const MatrixXd& dy, VectorXd& dg, VectorXd& db) {
    dg += (dy.array() * xhat.array()).colwise().sum().matrix().transpose();
    db += dy.colwise().sum().transpose();
    MatrixXd dxhat = dy.array().rowwise() * g.transpose().array();
    Eigen::ArrayXd m1 = dxhat.rowwise().mean().array();
    Eigen::ArrayXd m2 = (dxhat.array() * xhat.array()).rowwise().mean();
    MatrixXd dx = ((dxhat.array().colwise() - m1) - xhat.array().colwise() * m2);
    dx.array().colwise() *= inv_std.array();
    return dx;
}

void causal_softmax_rows(MatrixXd& s) {
    // row i may attend to columns 0..i
    const long n = s.rows();
    for (long i = 0; i < n; ++i) {
        double mx = s.row(i).head(i + 1).maxCoeff();
        double z = 0.0;
        for (long j = 0; j <= i; ++j) {
            double e = std::exp(s(i, j) - mx);
            s(i, j) = e;
            z += e;
        }
        for (long j = 0; j <= i; ++j) s(i, j) /= z;
        for (long j = i + 1; j < n; ++j) s(i, j) = 0.0;
    }
}

}  // namespace

ModelParams ModelParams::zeros(const ModelDims& dims) {
    ModelParams p;
    p.dims = dims;
    const int d = dims.d_model, dff = dims.d_ff;
    p.tok_emb = MatrixXd::Zero(dims.vocab, d);
    p.pos_emb = MatrixXd::Zero(dims.max_seq, d);
    p.layers.resize(dims.layers);
    for (LayerParams& l : p.layers) {
        l.ln1_g = VectorXd::Zero(d); l.ln1_b = VectorXd::Zero(d);
        l.ln2_g = VectorXd::Zero(d); l.ln2_b = VectorXd::Zero(d);
        l.wq = MatrixXd::Zero(d, d); l.wk = MatrixXd::Zero(d, d);
        l.wv = MatrixXd::Zero(d, d); l.wo = MatrixXd::Zero(d, d);
        l.bq = VectorXd::Zero(d); l.bk = VectorXd::Zero(d);
        l.bv = VectorXd::Zero(d); l.bo = VectorXd::Zero(d);
        l.w1 = MatrixXd::Zero(d, dff); l.b1 = VectorXd::Zero(dff);
        l.w2 = MatrixXd::Zero(dff, d); l.b2 = VectorXd::Zero(d);
    }
    p.lnf_g = VectorXd::Zero(d); p.lnf_b = VectorXd::Zero(d);
    p.head_w = MatrixXd::Zero(d, dims.vocab);
    p.head_b = VectorXd::Zero(dims.vocab);
    return p;
}

ModelParams ModelParams::init(const ModelDims& dims, Rng& rng) {
    ModelParams p = zeros(dims);
    const double scale = 0.02;
    auto fill = [&](MatrixXd& m) {
        for (long i = 0; i < m.rows(); ++i)
            for (long j = 0; j < m.cols(); ++j) m(i, j) = scale * rng.normal();
    };
    fill(p.tok_emb);
    fill(p.pos_emb);
    for (LayerParams& l : p.layers) {
        l.ln1_g.setOnes(); l.ln2_g.setOnes();
        fill(l.wq); fill(l.wk); fill(l.wv); fill(l.wo);
        fill(l.w1); fill(l.w2);
    }
    p.lnf_g.setOnes();
    fill(p.head_w);
    return p;
}

std::vector<TensorView> tensor_views(ModelParams& p) {
    std::vector<TensorView> v;
    auto add = [&](const std::string& name, MatrixXd& m) {
        v.push_back({name, m.data(), m.rows(), m.cols()});
    };
    auto addv = [&](const std::string& name, VectorXd& x) {
        v.push_back({name, x.data(), x.size(), 1});
    };
    add("tok_emb", p.tok_emb);
    add("pos_emb", p.pos_emb);
    for (size_t i = 0; i < p.layers.size(); ++i) {
        LayerParams& l = p.layers[i];
        std::string pre = "layer" + std::to_string(i) + ".";
        addv(pre + "ln1_g", l.ln1_g); addv(pre + "ln1_b", l.ln1_b);
        add(pre + "wq", l.wq); addv(pre + "bq", l.bq);
        add(pre + "wk", l.wk); addv(pre + "bk", l.bk);
        add(pre + "wv", l.wv); addv(pre + "bv", l.bv);
        add(pre + "wo", l.wo); addv(pre + "bo", l.bo);
        addv(pre + "ln2_g", l.ln2_g); addv(pre + "ln2_b", l.ln2_b);
        add(pre + "w1", l.w1); addv(pre + "b1", l.b1);
        add(pre + "w2", l.w2); addv(pre + "b2", l.b2);
    }
    addv("lnf_g", p.lnf_g); addv("lnf_b", p.lnf_b);
    add("head_w", p.head_w); addv("head_b", p.head_b);
    return v;
}

ForwardCache forward(const ModelParams& p, const TokenSequence& seq, const DropSpec& drop,
                     const std::vector<int>& logit_rows) {
    const ModelDims& dims = p.dims;
    const int n_full = seq.size();
    const int d = dims.d_model, heads = dims.heads, dh = d / heads;
    if (n_full == 0) throw std::invalid_argument("forward: empty sequence");

    ForwardCache c;
    c.x0.resize(n_full, d);
    for (int i = 0; i < n_full; ++i) {
        if (seq.tokens[i] < 0 || seq.tokens[i] >= dims.vocab)
            throw std::out_of_range("forward: token id out of vocabulary");
        if (seq.positions[i] < 0 || seq.positions[i] >= dims.max_seq)
            throw std::out_of_range("forward: position beyond max_seq");
        c.x0.row(i) = p.tok_emb.row(seq.tokens[i]) + p.pos_emb.row(seq.positions[i]);
    }

    const bool dropping = drop.active(dims.layers);
    c.survivors.reserve(n_full);
    for (int i = 0; i < n_full; ++i)
        if (!dropping || !drop.wants(seq.segments[i])) c.survivors.push_back(i);

    MatrixXd x = c.x0;
    c.layers.resize(dims.layers);
    for (int l = 0; l < dims.layers; ++l) {
        if (dropping && l == drop.layer) {
            MatrixXd reduced(static_cast<long>(c.survivors.size()), d);
            for (size_t r = 0; r < c.survivors.size(); ++r)
                reduced.row(r) = x.row(c.survivors[r]);
            x = std::move(reduced);
            c.drop_at = l;
        }
        LayerCache& lc = c.layers[l];
        const LayerParams& lp = p.layers[l];
        const long n = x.rows();
        lc.x = x;
        MatrixXd a;
        layer_norm(lc.x, lp.ln1_g, lp.ln1_b, lc.xhat1, lc.inv_std1, a);
        lc.q = (a * lp.wq).rowwise() + lp.bq.transpose();
        lc.k = (a * lp.wk).rowwise() + lp.bk.transpose();
        lc.v = (a * lp.wv).rowwise() + lp.bv.transpose();
        lc.ctx.resize(n, d);
        lc.probs.resize(heads);
        const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
        for (int h = 0; h < heads; ++h) {
            auto qh = lc.q.middleCols(h * dh, dh);
            auto kh = lc.k.middleCols(h * dh, dh);
            auto vh = lc.v.middleCols(h * dh, dh);
            MatrixXd s = qh * kh.transpose() * inv_sqrt;
            causal_softmax_rows(s);
            lc.ctx.middleCols(h * dh, dh) = s * vh;
            lc.probs[h] = std::move(s);
        }
        MatrixXd attn = (lc.ctx * lp.wo).rowwise() + lp.bo.transpose();
        lc.x2 = lc.x + attn;
        MatrixXd u;
        layer_norm(lc.x2, lp.ln2_g, lp.ln2_b, lc.xhat2, lc.inv_std2, u);
        lc.h1 = (u * lp.w1).rowwise() + lp.b1.transpose();
        lc.a1 = lc.h1.unaryExpr([](double v) { return gelu(v); });
        x = lc.x2 + ((lc.a1 * lp.w2).rowwise() + lp.b2.transpose());
    }
    c.xf = x;
    MatrixXd yf;
    layer_norm(c.xf, p.lnf_g, p.lnf_b, c.xhatf, c.inv_stdf, yf);

    // map original indices to rows of the (possibly reduced) final matrix
    std::vector<int> row_of(n_full, -1);
    if (c.drop_at >= 0) {
        for (size_t r = 0; r < c.survivors.size(); ++r) row_of[c.survivors[r]] = static_cast<int>(r);
    } else {
        for (int i = 0; i < n_full; ++i) row_of[i] = i;
    }
    c.logit_rows = logit_rows;
    c.logits.resize(static_cast<long>(logit_rows.size()), dims.vocab);
    for (size_t j = 0; j < logit_rows.size(); ++j) {
        int rr = row_of[logit_rows[j]];
        if (rr < 0) throw std::invalid_argument("forward: logit row was dropped");
        c.logits.row(j) = yf.row(rr) * p.head_w + p.head_b.transpose();
    }
    return c;
}

void backward(const ModelParams& p, const TokenSequence& seq, const ForwardCache& c,
              const MatrixXd& dlogits, ModelParams& g) {
    const ModelDims& dims = p.dims;
    const int d = dims.d_model, heads = dims.heads, dh = d / heads;
    const int n_full = seq.size();
    const long n_last = c.xf.rows();

    std::vector<int> row_of(n_full, -1);
    if (c.drop_at >= 0) {
        for (size_t r = 0; r < c.survivors.size(); ++r) row_of[c.survivors[r]] = static_cast<int>(r);
    } else {
        for (int i = 0; i < n_full; ++i) row_of[i] = i;
    }

    // head + final layer norm
    MatrixXd dyf = MatrixXd::Zero(n_last, d);
    for (size_t j = 0; j < c.logit_rows.size(); ++j) {
        int rr = row_of[c.logit_rows[j]];
        VectorXd dl = dlogits.row(j).transpose();
        VectorXd yrow = (c.xhatf.row(rr).array() * p.lnf_g.transpose().array() +
                         p.lnf_b.transpose().array()).matrix().transpose();
        g.head_w += yrow * dl.transpose();
        g.head_b += dl;
        dyf.row(rr) += (p.head_w * dl).transpose();
    }
    MatrixXd dx = layer_norm_backward(c.xhatf, c.inv_stdf, p.lnf_g, dyf, g.lnf_g, g.lnf_b);

    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
    for (int l = dims.layers - 1; l >= 0; --l) {
        const LayerCache& lc = c.layers[l];
        const LayerParams& lp = p.layers[l];
        LayerParams& gl = g.layers[l];
        const long n = lc.x.rows();

        // feed-forward block
        MatrixXd dff = dx;  // gradient on x3 = x2 + ff
        MatrixXd da1 = dff * lp.w2.transpose();
        MatrixXd u(n, dims.d_ff);  // recompute not needed: u enters via w1; recover from h1
        // u = ln2 output; recompute it from cached xhat2
        MatrixXd u2 = (lc.xhat2.array().rowwise() * lp.ln2_g.transpose().array()).matrix();
        u2 = (u2.array().rowwise() + lp.ln2_b.transpose().array()).matrix();
        gl.w2 += lc.a1.transpose() * dff;
        gl.b2 += dff.colwise().sum().transpose();
        MatrixXd dh1 = da1.array() * lc.h1.unaryExpr([](double v) { return dgelu(v); }).array();
        gl.w1 += u2.transpose() * dh1;
        gl.b1 += dh1.colwise().sum().transpose();
        MatrixXd du = dh1 * lp.w1.transpose();
        MatrixXd dx2 = layer_norm_backward(lc.xhat2, lc.inv_std2, lp.ln2_g, du, gl.ln2_g, gl.ln2_b);
        dx2 += dx;  // residual

        // attention block
        MatrixXd dattn = dx2;
        gl.wo += lc.ctx.transpose() * dattn;
        gl.bo += dattn.colwise().sum().transpose();
        MatrixXd dctx = dattn * lp.wo.transpose();
        MatrixXd dq = MatrixXd::Zero(n, d), dk = MatrixXd::Zero(n, d), dv = MatrixXd::Zero(n, d);
        for (int h = 0; h < heads; ++h) {
            auto qh = lc.q.middleCols(h * dh, dh);
            auto kh = lc.k.middleCols(h * dh, dh);
            auto vh = lc.v.middleCols(h * dh, dh);
            auto dctx_h = dctx.middleCols(h * dh, dh);
            const MatrixXd& prob = lc.probs[h];
            dv.middleCols(h * dh, dh) = prob.transpose() * dctx_h;
            MatrixXd dprob = dctx_h * vh.transpose();
            // softmax backward; masked entries have prob == 0 so they vanish
            VectorXd rowdot = (dprob.array() * prob.array()).rowwise().sum();
            MatrixXd ds = prob.array() * (dprob.array().colwise() - rowdot.array());
            dq.middleCols(h * dh, dh) = ds * kh * inv_sqrt;
            dk.middleCols(h * dh, dh) = ds.transpose() * qh * inv_sqrt;
        }
        MatrixXd a1n = (lc.xhat1.array().rowwise() * lp.ln1_g.transpose().array()).matrix();
        a1n = (a1n.array().rowwise() + lp.ln1_b.transpose().array()).matrix();
        gl.wq += a1n.transpose() * dq;
        gl.bq += dq.colwise().sum().transpose();
        gl.wk += a1n.transpose() * dk;
        gl.bk += dk.colwise().sum().transpose();
        gl.wv += a1n.transpose() * dv;
        gl.bv += dv.colwise().sum().transpose();
        MatrixXd da = dq * lp.wq.transpose() + dk * lp.wk.transpose() + dv * lp.wv.transpose();
        MatrixXd dxin = layer_norm_backward(lc.xhat1, lc.inv_std1, lp.ln1_g, da, gl.ln1_g, gl.ln1_b);
        dxin += dx2;  // residual into the layer input

        if (c.drop_at == l) {
            MatrixXd scattered = MatrixXd::Zero(n_full, d);
            for (size_t r = 0; r < c.survivors.size(); ++r)
                scattered.row(c.survivors[r]) = dxin.row(r);
            dx = std::move(scattered);
        } else {
            dx = std::move(dxin);
        }
    }

    for (int i = 0; i < n_full; ++i) {
        g.tok_emb.row(seq.tokens[i]) += dx.row(i);
        g.pos_emb.row(seq.positions[i]) += dx.row(i);
    }
}

LogprobResult logprob_of(const ModelParams& p, const TokenSequence& seq, const DropSpec& drop) {
    // locate the response suffix
    int resp_start = -1;
    for (int i = 0; i < seq.size(); ++i)
        if (seq.segments[i] == Segment::Response) { resp_start = i; break; }
    if (resp_start <= 0) throw std::invalid_argument("logprob_of: no response tokens");

    LogprobResult r;
    for (int i = resp_start; i < seq.size(); ++i) r.logit_rows.push_back(i - 1);
    r.cache = forward(p, seq, drop, r.logit_rows);

    const long t = static_cast<long>(r.logit_rows.size());
    r.log_probs.resize(t, p.dims.vocab);
    r.logprob.resize(t);
    for (long j = 0; j < t; ++j) {
        double mx = r.cache.logits.row(j).maxCoeff();
        double z = (r.cache.logits.row(j).array() - mx).exp().sum();
        r.log_probs.row(j) = r.cache.logits.row(j).array() - mx - std::log(z);
        r.logprob[j] = r.log_probs(j, seq.tokens[resp_start + j]);
    }
    return r;
}

Sampler::Sampler(const ModelParams& p, const TokenSequence& ctx, const DropSpec& drop)
    : p_(p), drop_(drop) {
    ForwardCache c = forward(p, ctx, drop, {ctx.size() - 1});
    const int L = p.dims.layers;
    keys_.resize(L);
    values_.resize(L);
    for (int l = 0; l < L; ++l) {
        keys_[l] = c.layers[l].k;
        values_[l] = c.layers[l].v;
    }
    last_logits_ = c.logits.row(0).transpose();
}

VectorXd Sampler::prefill() { return last_logits_; }

VectorXd Sampler::step(int token, int position) {
    const ModelDims& dims = p_.dims;
    const int d = dims.d_model, heads = dims.heads, dh = d / heads;
    if (position >= dims.max_seq) throw std::out_of_range("Sampler: position beyond max_seq");
    Eigen::RowVectorXd x = p_.tok_emb.row(token) + p_.pos_emb.row(position);
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
    for (int l = 0; l < dims.layers; ++l) {
        const LayerParams& lp = p_.layers[l];
        double mean = x.mean();
        double var = (x.array() - mean).square().mean();
        Eigen::RowVectorXd a = ((x.array() - mean) / std::sqrt(var + kLnEps)) *
                                   lp.ln1_g.transpose().array() +
                               lp.ln1_b.transpose().array();
        Eigen::RowVectorXd q = a * lp.wq + lp.bq.transpose();
        Eigen::RowVectorXd k = a * lp.wk + lp.bk.transpose();
        Eigen::RowVectorXd v = a * lp.wv + lp.bv.transpose();
        keys_[l].conservativeResize(keys_[l].rows() + 1, Eigen::NoChange);
        keys_[l].row(keys_[l].rows() - 1) = k;
        values_[l].conservativeResize(values_[l].rows() + 1, Eigen::NoChange);
        values_[l].row(values_[l].rows() - 1) = v;
        Eigen::RowVectorXd ctx(d);
        for (int h = 0; h < heads; ++h) {
            auto kh = keys_[l].middleCols(h * dh, dh);
            auto vh = values_[l].middleCols(h * dh, dh);
            VectorXd s = kh * q.middleCols(h * dh, dh).transpose() * inv_sqrt;
            double mx = s.maxCoeff();
            VectorXd e = (s.array() - mx).exp();
            e /= e.sum();
            ctx.middleCols(h * dh, dh) = e.transpose() * vh;
        }
        Eigen::RowVectorXd attn = ctx * lp.wo + lp.bo.transpose();
        Eigen::RowVectorXd x2 = x + attn;
        mean = x2.mean();
        var = (x2.array() - mean).square().mean();
        Eigen::RowVectorXd u = ((x2.array() - mean) / std::sqrt(var + kLnEps)) *
                                   lp.ln2_g.transpose().array() +
                               lp.ln2_b.transpose().array();
        Eigen::RowVectorXd h1 = u * lp.w1 + lp.b1.transpose();
        Eigen::RowVectorXd a1 = h1.unaryExpr([](double vv) { return gelu(vv); });
        x = x2 + a1 * lp.w2 + lp.b2.transpose();
    }
    double mean = x.mean();
    double var = (x.array() - mean).square().mean();
    Eigen::RowVectorXd y = ((x.array() - mean) / std::sqrt(var + kLnEps)) *
                               p_.lnf_g.transpose().array() +
                           p_.lnf_b.transpose().array();
    last_logits_ = (y * p_.head_w + p_.head_b.transpose()).transpose();
    return last_logits_;
}

namespace {

int sample_from_logits(const VectorXd& logits, double temperature, Rng& rng) {
    if (temperature <= 0.0) {
        int best = 0;
        logits.maxCoeff(&best);
        return best;
    }
    VectorXd scaled = logits / temperature;
    double mx = scaled.maxCoeff();
    VectorXd probs = (scaled.array() - mx).exp();
    probs /= probs.sum();
    double u = rng.uniform();
    double acc = 0.0;
    for (long i = 0; i < probs.size(); ++i) {
        acc += probs(i);
        if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(probs.size()) - 1;
}

SampledResponse decode(const ModelParams& p, const TokenSequence& ctx, double temperature,
                       int max_len, Rng* rng, int resp_base, const DropSpec& drop) {
    Sampler sampler(p, ctx, drop);
    SampledResponse out;
    VectorXd logits = sampler.prefill();
    Rng dummy(0);
    for (int j = 0; j < max_len; ++j) {
        int tok = sample_from_logits(logits, temperature, rng ? *rng : dummy);
        if (tok == Vocab::kEnd) {
            out.ended = true;
            break;
        }
        out.tokens.push_back(tok);
        if (j + 1 < max_len) logits = sampler.step(tok, resp_base + j);
    }
    return out;
}

}  // namespace

SampledResponse sample_response(const ModelParams& p, const TokenSequence& ctx,
                                double temperature, int max_len, Rng& rng,
                                int resp_base, const DropSpec& drop) {
    return decode(p, ctx, temperature, max_len, &rng, resp_base, drop);
}

SampledResponse greedy_response(const ModelParams& p, const TokenSequence& ctx, int max_len,
                                int resp_base, const DropSpec& drop) {
    return decode(p, ctx, 0.0, max_len, nullptr, resp_base, drop);
}

std::vector<long> token_counts(const TokenSequence& seq, const DropSpec& drop, int num_layers) {
    long full = seq.size();
    long reduced = 0;
    for (int i = 0; i < seq.size(); ++i)
        if (!drop.wants(seq.segments[i])) reduced++;
    std::vector<long> counts(num_layers, full);
    if (drop.active(num_layers))
        for (int l = std::max(0, drop.layer); l < num_layers; ++l) counts[l] = reduced;
    return counts;
}

double flops_estimate(int d_model, int d_ff, const std::vector<long>& per_layer_counts) {
    double total = 0.0;
    const double d = d_model, dff = d_ff;
    for (long n : per_layer_counts)
        total += 8.0 * n * d * d + 4.0 * static_cast<double>(n) * n * d + 4.0 * n * d * dff;
    return total;
}

}  // namespace hcpo
