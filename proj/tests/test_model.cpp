#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <set>

#include "hcpo/env.hpp"
#include "hcpo/model.hpp"
#include "hcpo/rng.hpp"
#include "hcpo/tokenize.hpp"

using namespace hcpo;

namespace {

ModelDims tiny_dims() {
    ModelDims d;
    d.layers = 2;
    d.d_model = 8;
    d.heads = 2;
    d.d_ff = 16;
    d.vocab = 24;
    d.max_seq = 48;
    d.max_response = 8;
    return d;
}

// hand-built sequence: 3 instr, 4 hist-vision, 2 hist-action, 3 current, rest response
TokenSequence tiny_seq(int response_len, uint64_t seed) {
    Rng rng = derive_rng(seed, {"tiny-seq"});
    TokenSequence s;
    auto push = [&](Segment seg, int pos) {
        s.tokens.push_back(static_cast<int>(rng.uniform_int(24)));
        s.segments.push_back(seg);
        s.positions.push_back(pos);
    };
    int p = 0;
    for (int i = 0; i < 3; ++i) push(Segment::Instr, p++);
    for (int i = 0; i < 4; ++i) push(Segment::HistVision, p++);
    for (int i = 0; i < 2; ++i) push(Segment::HistAction, p++);
    for (int i = 0; i < 3; ++i) push(Segment::CurVision, p++);
    for (int i = 0; i < response_len; ++i) push(Segment::Response, p++);
    return s;
}

double max_abs_diff(const MatrixXd& a, const MatrixXd& b) {
    return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("init is seed-deterministic with the right spread") {
    Rng r1 = derive_rng(1, {"init"});
    Rng r2 = derive_rng(1, {"init"});
    ModelParams a = ModelParams::init(tiny_dims(), r1);
    ModelParams b = ModelParams::init(tiny_dims(), r2);
    CHECK(max_abs_diff(a.tok_emb, b.tok_emb) == 0.0);
    CHECK(max_abs_diff(a.layers[0].wq, b.layers[0].wq) == 0.0);
    CHECK((a.lnf_g.array() == 1.0).all());
    CHECK((a.layers[0].ln1_b.array() == 0.0).all());
    double var = a.tok_emb.array().square().mean();
    CHECK(std::sqrt(var) == doctest::Approx(0.02).epsilon(0.15));
}

TEST_CASE("tensor_views cover every parameter with unique names") {
    ModelParams p = ModelParams::zeros(tiny_dims());
    std::vector<TensorView> views = tensor_views(p);
    std::set<std::string> names;
    long total = 0;
    for (const TensorView& v : views) {
        CHECK(names.insert(v.name).second);
        total += v.size();
    }
    const ModelDims d = tiny_dims();
    long per_layer = 4L * d.d_model                       // ln gains/biases
                     + 4L * d.d_model * d.d_model + 4L * d.d_model   // attention
                     + 2L * d.d_model * d.d_ff + d.d_ff + d.d_model; // mlp
    long want = static_cast<long>(d.vocab) * d.d_model + static_cast<long>(d.max_seq) * d.d_model +
                d.layers * per_layer + 2L * d.d_model +
                static_cast<long>(d.d_model) * d.vocab + d.vocab;
    CHECK(total == want);
}

TEST_CASE("logits are causal") {
    Rng rng = derive_rng(2, {"caus"});
    ModelParams p = ModelParams::init(tiny_dims(), rng);
    TokenSequence s = tiny_seq(4, 3);
    std::vector<int> rows = {5, 9};
    ForwardCache base = forward(p, s, DropSpec::none(), rows);
    TokenSequence mut = s;
    mut.tokens[12] = (mut.tokens[12] + 1) % 24;  // later than both logit rows
    ForwardCache after = forward(p, mut, DropSpec::none(), rows);
    CHECK(max_abs_diff(base.logits, after.logits) == 0.0);

    mut = s;
    mut.tokens[3] = (mut.tokens[3] + 1) % 24;  // earlier token must matter
    after = forward(p, mut, DropSpec::none(), rows);
    CHECK(max_abs_diff(base.logits, after.logits) > 0.0);
}

TEST_CASE("inactive drop specs reproduce the plain forward bit-for-bit") {
    Rng rng = derive_rng(3, {"nodrop"});
    ModelParams p = ModelParams::init(tiny_dims(), rng);
    TokenSequence s = tiny_seq(4, 4);
    std::vector<int> rows = {static_cast<int>(s.tokens.size()) - 1};
    ForwardCache base = forward(p, s, DropSpec::none(), rows);
    ForwardCache at_end = forward(p, s, DropSpec::vhis_at(tiny_dims().layers), rows);
    CHECK(max_abs_diff(base.logits, at_end.logits) == 0.0);
}

TEST_CASE("dropping history mid-stack changes logits, and layer order matters") {
    Rng rng = derive_rng(4, {"drop"});
    ModelParams p = ModelParams::init(tiny_dims(), rng);
    TokenSequence s = tiny_seq(4, 5);
    std::vector<int> rows = {static_cast<int>(s.tokens.size()) - 1};
    ForwardCache base = forward(p, s, DropSpec::none(), rows);
    ForwardCache d1 = forward(p, s, DropSpec::vhis_at(1), rows);
    CHECK(max_abs_diff(base.logits, d1.logits) > 0.0);
    CHECK(d1.survivors.size() == s.tokens.size() - 4);
}

TEST_CASE("drop both at layer 0 equals encoding without history") {
    EnvConfig env;
    Vocab vocab(env, 2);
    ModelDims dims;  // defaults sized for the real vocabulary
    Rng rng = derive_rng(5, {"drop0"});
    ModelParams p = ModelParams::init(dims, rng);
    Episode ep = generate_episode(env, 11, TaskKind::Recall2);
    TokenSequence full = vocab.encode_context(step_context(ep, 2, 2));
    TokenSequence bare = vocab.encode_context(step_context(ep, 2, 0));
    std::vector<int> full_rows = {full.size() - 1};
    std::vector<int> bare_rows = {bare.size() - 1};
    ForwardCache a = forward(p, full, DropSpec::both_at(0), full_rows);
    ForwardCache b = forward(p, bare, DropSpec::none(), bare_rows);
    CHECK(max_abs_diff(a.logits, b.logits) == 0.0);
}

TEST_CASE("gradients match central finite differences") {
    ModelDims dims = tiny_dims();
    Rng rng = derive_rng(6, {"grad"});
    ModelParams p = ModelParams::init(dims, rng);
    TokenSequence s = tiny_seq(4, 7);
    std::vector<int> rows = {7, 11, static_cast<int>(s.tokens.size()) - 1};
    DropSpec drop = DropSpec::vhis_at(1);  // exercise the gather/scatter path

    MatrixXd dlogits(3, dims.vocab);
    Rng dr = derive_rng(6, {"grad", "dl"});
    for (int i = 0; i < dlogits.rows(); ++i)
        for (int j = 0; j < dlogits.cols(); ++j) dlogits(i, j) = dr.normal();

    auto objective = [&](ModelParams& q) {
        ForwardCache c = forward(q, s, drop, rows);
        return (dlogits.array() * c.logits.array()).sum();
    };

    ModelParams g = ModelParams::zeros(dims);
    ForwardCache cache = forward(p, s, drop, rows);
    backward(p, s, cache, dlogits, g);

    std::vector<TensorView> pv = tensor_views(p);
    std::vector<TensorView> gv = tensor_views(g);
    REQUIRE(pv.size() == gv.size());
    Rng pick = derive_rng(6, {"grad", "pick"});
    const double h = 1e-6;
    for (size_t t = 0; t < pv.size(); ++t) {
        // a few random coordinates per tensor
        for (int trial = 0; trial < 3; ++trial) {
            long idx = static_cast<long>(pick.uniform_int(pv[t].size()));
            double save = pv[t].data[idx];
            pv[t].data[idx] = save + h;
            double up = objective(p);
            pv[t].data[idx] = save - h;
            double down = objective(p);
            pv[t].data[idx] = save;
            double fd = (up - down) / (2 * h);
            double an = gv[t].data[idx];
            CHECK(std::abs(fd - an) < 1e-5 * std::max(1.0, std::abs(fd)));
        }
    }
}

TEST_CASE("logprob_of returns normalized conditionals consistent with forward") {
    ModelDims dims = tiny_dims();
    Rng rng = derive_rng(7, {"lp"});
    ModelParams p = ModelParams::init(dims, rng);
    TokenSequence s = tiny_seq(5, 8);
    LogprobResult lr = logprob_of(p, s, DropSpec::none());
    REQUIRE(lr.logprob.size() == 5);
    REQUIRE(lr.log_probs.rows() == 5);
    for (int i = 0; i < 5; ++i) {
        double z = lr.log_probs.row(i).array().exp().sum();
        CHECK(z == doctest::Approx(1.0).epsilon(1e-12));
        int resp_start = s.size() - 5;
        CHECK(lr.logprob[i] ==
              doctest::Approx(lr.log_probs(i, s.tokens[resp_start + i])).epsilon(1e-15));
        CHECK(lr.logprob[i] < 0.0);
    }
    // first conditional comes from the last context row
    ForwardCache c = forward(p, s, DropSpec::none(), {s.size() - 6});
    VectorXd row = c.logits.row(0);
    VectorXd lsm = row.array() - std::log(row.array().exp().sum());
    CHECK(std::abs(lsm(s.tokens[s.size() - 5]) - lr.logprob[0]) < 1e-12);
}

TEST_CASE("incremental sampler agrees with the batch forward") {
    ModelDims dims = tiny_dims();
    Rng rng = derive_rng(8, {"samp"});
    ModelParams p = ModelParams::init(dims, rng);
    TokenSequence ctx = tiny_seq(0, 9);
    int resp_base = ctx.positions.back() + 1;

    SampledResponse greedy = greedy_response(p, ctx, 6, resp_base);
    // replay with full forwards: every emitted token is the running argmax
    TokenSequence s = ctx;
    for (size_t step = 0; step < greedy.tokens.size(); ++step) {
        ForwardCache c = forward(p, s, DropSpec::none(), {s.size() - 1});
        int best = 0;
        c.logits.row(0).maxCoeff(&best);
        CHECK(best == greedy.tokens[step]);
        CHECK(best != Vocab::kEnd);
        std::vector<int> one = {best};
        Vocab::append_response(s, one, resp_base + static_cast<int>(step));
    }
    if (greedy.ended) {
        ForwardCache c = forward(p, s, DropSpec::none(), {s.size() - 1});
        int best = 0;
        c.logits.row(0).maxCoeff(&best);
        CHECK(best == Vocab::kEnd);
    }
}

TEST_CASE("temperature sampling is deterministic given the rng stream") {
    ModelDims dims = tiny_dims();
    Rng rng = derive_rng(9, {"samp2"});
    ModelParams p = ModelParams::init(dims, rng);
    TokenSequence ctx = tiny_seq(0, 10);
    int resp_base = ctx.positions.back() + 1;
    Rng ra = derive_rng(1, {"roll"});
    Rng rb = derive_rng(1, {"roll"});
    SampledResponse a = sample_response(p, ctx, 1.0, 6, ra, resp_base);
    SampledResponse b = sample_response(p, ctx, 1.0, 6, rb, resp_base);
    CHECK(a.tokens == b.tokens);
    CHECK(a.ended == b.ended);
}

TEST_CASE("token_counts and flops_estimate worked example") {
    TokenSequence s;
    for (int i = 0; i < 150; ++i) {
        s.tokens.push_back(0);
        s.segments.push_back(i >= 10 && i < 82 ? Segment::HistVision : Segment::CurVision);
        s.positions.push_back(i);
    }
    std::vector<long> counts = token_counts(s, DropSpec::vhis_at(2), 6);
    CHECK(counts == std::vector<long>({150, 150, 78, 78, 78, 78}));

    // single layer, n=4, d=8, d_ff=16: 8nd^2 + 4n^2d + 4*n*d*d_ff = 4608
    CHECK(flops_estimate(8, 16, {4}) == 4608.0);
    CHECK(flops_estimate(8, 16, {4, 4}) == 9216.0);
}

}  // TEST_SUITE
