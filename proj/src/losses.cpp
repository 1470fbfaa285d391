#include "hcpo/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace hcpo {

std::vector<double> compute_advantages(const std::vector<double>& rewards) {
    const size_t g = rewards.size();
    if (g < 2) throw std::invalid_argument("compute_advantages: need G >= 2");
    double mean = 0.0;
    for (double r : rewards) mean += r;
    mean /= static_cast<double>(g);
    double var = 0.0;
    for (double r : rewards) var += (r - mean) * (r - mean);
    var /= static_cast<double>(g);
    double denom = std::sqrt(var) + 1e-8;
    std::vector<double> adv(g);
    for (size_t i = 0; i < g; ++i) adv[i] = (rewards[i] - mean) / denom;
    return adv;
}

namespace {

// d KL(p || q) / d logits_p = p .* (g - <p, g>), g = log p - log q
Eigen::RowVectorXd kl_grad(const Eigen::RowVectorXd& lp, const Eigen::RowVectorXd& lq,
                           double& kl_out) {
    Eigen::RowVectorXd p = lp.array().exp();
    Eigen::RowVectorXd g = lp - lq;
    double kl = (p.array() * g.array()).sum();
    kl_out = kl;
    return (p.array() * (g.array() - kl)).matrix();
}

}  // namespace

BranchLossResult branch_policy_loss(const std::vector<MemberBranchInput>& members,
                                    double eps, double beta) {
    BranchLossResult out;
    long total_tokens = 0, clipped_tokens = 0;
    for (const MemberBranchInput& m : members) {
        const MatrixXd& lp = *m.new_log_probs;
        const long t = lp.rows();
        if (t == 0) throw std::invalid_argument("branch_policy_loss: empty member");
        const double inv_t = 1.0 / static_cast<double>(t);
        VectorXd dlp = VectorXd::Zero(t);
        MatrixXd dlog = MatrixXd::Zero(t, lp.cols());
        double surr = 0.0;
        for (long j = 0; j < t; ++j) {
            int tok = m.chosen[j];
            double lnew = lp(j, tok);
            double rho = std::exp(lnew - m.old_logprob(j));
            double clipped = std::min(std::max(rho, 1.0 - eps), 1.0 + eps);
            double a = m.advantage;
            surr += std::min(rho * a, clipped * a);
            bool gated = (a > 0.0 && rho > 1.0 + eps) || (a < 0.0 && rho < 1.0 - eps);
            ++total_tokens;
            if (gated) {
                ++clipped_tokens;
            } else {
                // d(-surr/t)/d lnew = -(1/t) * a * rho
                double g = -inv_t * a * rho;
                dlp(j) = g;
                Eigen::RowVectorXd p = lp.row(j).array().exp();
                dlog.row(j) -= g * p;
                dlog(j, tok) += g;
            }
            if (beta > 0.0) {
                if (!m.ref_log_probs)
                    throw std::invalid_argument("branch_policy_loss: beta > 0 needs ref");
                double kl = 0.0;
                dlog.row(j) += beta * inv_t * kl_grad(lp.row(j), m.ref_log_probs->row(j), kl);
                out.ref_kl += inv_t * kl;
            }
        }
        out.policy_loss -= inv_t * surr;
        out.dlogprob.push_back(std::move(dlp));
        out.dlogits.push_back(std::move(dlog));
    }
    out.loss = out.policy_loss + beta * out.ref_kl;
    if (!std::isfinite(out.loss)) throw std::runtime_error("branch_policy_loss: non-finite loss");
    out.clip_fraction =
        total_tokens ? static_cast<double>(clipped_tokens) / static_cast<double>(total_tokens)
                     : 0.0;
    return out;
}

AlignmentResult alignment_kl(const std::vector<const MatrixXd*>& student,
                             const std::vector<const MatrixXd*>& teacher) {
    if (student.size() != teacher.size())
        throw std::invalid_argument("alignment_kl: member count mismatch");
    AlignmentResult out;
    for (size_t i = 0; i < student.size(); ++i) {
        const MatrixXd& ls = *student[i];
        const MatrixXd& lt = *teacher[i];
        if (ls.rows() != lt.rows() || ls.cols() != lt.cols())
            throw std::invalid_argument("alignment_kl: shape mismatch");
        const long t = ls.rows();
        const double inv_t = 1.0 / static_cast<double>(t);
        MatrixXd dlog = MatrixXd::Zero(t, ls.cols());
        for (long j = 0; j < t; ++j) {
            double kl = 0.0;
            dlog.row(j) += inv_t * kl_grad(ls.row(j), lt.row(j), kl);
            out.loss += inv_t * kl;
        }
        out.dlogits_student.push_back(std::move(dlog));
    }
    if (!std::isfinite(out.loss)) throw std::runtime_error("alignment_kl: non-finite loss");
    return out;
}

}  // namespace hcpo
