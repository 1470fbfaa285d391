#pragma once

#include <Eigen/Dense>
#include <vector>

namespace hcpo {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// A_i = (R_i - mean) / (std_pop + 1e-8)
std::vector<double> compute_advantages(const std::vector<double>& rewards);

// One rollout member as seen by a policy-loss branch. log_probs rows are
// log-softmax over the vocabulary at each response token position; old and
// ref sides are constants for differentiation.
struct MemberBranchInput {
    const MatrixXd* new_log_probs = nullptr;  // t x V
    VectorXd old_logprob;                     // t
    const MatrixXd* ref_log_probs = nullptr;  // t x V, may be null when beta = 0
    std::vector<int> chosen;                  // t response token ids
    double advantage = 0.0;
};

struct BranchLossResult {
    double loss = 0.0;          // policy + beta * ref_kl
    double policy_loss = 0.0;
    double ref_kl = 0.0;        // unweighted, token-mean then member-sum
    double clip_fraction = 0.0; // fraction of tokens with gated (zero) policy gradient
    std::vector<VectorXd> dlogprob;  // per member: d(policy term)/d(new logprob)
    std::vector<MatrixXd> dlogits;   // per member: d(loss)/d(new logits), t x V
};

// -sum_i mean_t [ min(rho A_i, clip(rho, 1-eps, 1+eps) A_i) - beta KL(pi||ref) ]
// with rho = exp(new - old) per token; exact full-vocabulary KL.
BranchLossResult branch_policy_loss(const std::vector<MemberBranchInput>& members,
                                    double eps, double beta);

struct AlignmentResult {
    double loss = 0.0;
    std::vector<MatrixXd> dlogits_student;  // t x V per member
};

// sum_i mean_t KL(student_i || teacher_i); the teacher side is detached.
AlignmentResult alignment_kl(const std::vector<const MatrixXd*>& student,
                             const std::vector<const MatrixXd*>& teacher);

}  // namespace hcpo
