#pragma once

#include <Eigen/Dense>
#include <limits>
#include <string>
#include <vector>

#include "hcpo/rng.hpp"
#include "hcpo/tokenize.hpp"

namespace hcpo {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct ModelDims {
    int layers = 4;
    int d_model = 32;
    int heads = 4;
    int d_ff = 64;
    int vocab = 512;
    int max_seq = 192;
    int max_response = 24;
    bool operator==(const ModelDims&) const = default;
};

struct LayerParams {
    VectorXd ln1_g, ln1_b, ln2_g, ln2_b;
    MatrixXd wq, wk, wv, wo;   // d x d
    VectorXd bq, bk, bv, bo;
    MatrixXd w1, w2;           // d x d_ff, d_ff x d
    VectorXd b1, b2;
};

// Tiny pre-LN decoder-only transformer, double precision throughout.
struct ModelParams {
    ModelDims dims;
    MatrixXd tok_emb;  // vocab x d
    MatrixXd pos_emb;  // max_seq x d
    std::vector<LayerParams> layers;
    VectorXd lnf_g, lnf_b;
    MatrixXd head_w;   // d x vocab
    VectorXd head_b;

    static ModelParams init(const ModelDims& dims, Rng& rng);
    static ModelParams zeros(const ModelDims& dims);
};

struct TensorView {
    std::string name;
    double* data;
    long rows, cols;
    long size() const { return rows * cols; }
};

std::vector<TensorView> tensor_views(ModelParams& p);

// Segments listed in `drop` are removed (queries, keys and values alike) from
// layer index `layer` onward; layer == dims.layers (or an empty drop set)
// is a no-op identical to the plain forward.
struct DropSpec {
    int layer = std::numeric_limits<int>::max();
    bool drop_vhis = false;
    bool drop_ahis = false;

    bool wants(Segment s) const {
        return (s == Segment::HistVision && drop_vhis) ||
               (s == Segment::HistAction && drop_ahis);
    }
    bool active(int num_layers) const {
        return layer < num_layers && (drop_vhis || drop_ahis);
    }
    static DropSpec none() { return {}; }
    static DropSpec vhis_at(int k) { return {k, true, false}; }
    static DropSpec ahis_at(int k) { return {k, false, true}; }
    static DropSpec both_at(int k) { return {k, true, true}; }
};

struct LayerCache {
    MatrixXd x;          // layer input
    MatrixXd xhat1; VectorXd inv_std1;
    MatrixXd q, k, v;    // n x d
    std::vector<MatrixXd> probs;  // per head, n x n
    MatrixXd ctx;        // concatenated head outputs, n x d
    MatrixXd x2;         // after attention residual
    MatrixXd xhat2; VectorXd inv_std2;
    MatrixXd h1;         // pre-activation, n x d_ff
    MatrixXd a1;         // gelu(h1)
};

struct ForwardCache {
    std::vector<int> survivors;    // original indices present after the drop
    int drop_at = -1;              // layer index where the filter applied, -1 if never
    MatrixXd x0;                   // embeddings (full length)
    std::vector<LayerCache> layers;
    MatrixXd xf;                   // final layer output
    MatrixXd xhatf; VectorXd inv_stdf;
    std::vector<int> logit_rows;   // original indices logits were computed for
    MatrixXd logits;               // logit_rows.size() x vocab
};

// logit_rows are original sequence indices; each must survive the drop.
ForwardCache forward(const ModelParams& p, const TokenSequence& seq, const DropSpec& drop,
                     const std::vector<int>& logit_rows);

// Accumulates gradients of sum(dlogits .* logits) into g.
void backward(const ModelParams& p, const TokenSequence& seq, const ForwardCache& cache,
              const MatrixXd& dlogits, ModelParams& g);

struct LogprobResult {
    std::vector<double> logprob;   // per response token
    MatrixXd log_probs;            // response_len x vocab, log-softmax rows
    ForwardCache cache;            // reusable for backward
    std::vector<int> logit_rows;
};

// Exact teacher-forced conditional log-probabilities of the response tokens in
// `seq` (its Segment::Response suffix) under the given drop spec.
LogprobResult logprob_of(const ModelParams& p, const TokenSequence& seq, const DropSpec& drop);

// Incremental decoder used for rollouts and greedy evaluation.
class Sampler {
public:
    Sampler(const ModelParams& p, const TokenSequence& ctx, const DropSpec& drop);

    // logits for the next token; call once before the first step()
    VectorXd prefill();

    // appends a response token and returns logits for the following one
    VectorXd step(int token, int position);

private:
    const ModelParams& p_;
    DropSpec drop_;
    std::vector<MatrixXd> keys_, values_;  // per layer, grown row by row
    VectorXd last_logits_;
};

struct SampledResponse {
    std::vector<int> tokens;  // without the end token
    bool ended = false;       // true when kEnd was produced before max_len
};

SampledResponse sample_response(const ModelParams& p, const TokenSequence& ctx,
                                double temperature, int max_len, Rng& rng,
                                int resp_base, const DropSpec& drop = DropSpec::none());

SampledResponse greedy_response(const ModelParams& p, const TokenSequence& ctx, int max_len,
                                int resp_base, const DropSpec& drop = DropSpec::none());

// per-layer position counts under the drop spec
std::vector<long> token_counts(const TokenSequence& seq, const DropSpec& drop, int num_layers);

// 8*n*d^2 + 4*n^2*d + 4*n*d*d_ff per layer, summed over the count table
double flops_estimate(int d_model, int d_ff, const std::vector<long>& per_layer_counts);

}  // namespace hcpo
