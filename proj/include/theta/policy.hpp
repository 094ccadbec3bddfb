#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "theta/design_space.hpp"
#include "theta/diff/tensor.hpp"
#include "theta/rng.hpp"

namespace theta {

struct MlpArch {
    std::vector<std::size_t> hidden{256, 256};
    std::size_t input_width = 16;  // width of the all-ones constant input
    bool operator==(const MlpArch&) const = default;
};

struct TransformerArch {
    std::size_t depth = 2;
    std::size_t width = 64;
    std::size_t heads = 4;
    std::size_t ff_width = 256;
    bool operator==(const TransformerArch&) const = default;
};

using Architecture = std::variant<MlpArch, TransformerArch>;

// "mlp", "mlp:256,256", "mlp:64,64@8" (hidden sizes, optional input width),
// "transformer", "transformer:2-64-4-256" (depth-width-heads-ff).
Architecture parse_architecture(const std::string& text);
std::string architecture_string(const Architecture& arch);
void validate_architecture(const Architecture& arch);

// One probability vector per dimension, held in log space. `joint_log` is
// the concatenation of the per-dimension vectors in layout order.
struct PolicyOutput {
    std::vector<diff::Tensor> log_probs;
    diff::Tensor joint_log;
    OutputLayout layout;

    // Slices flat logits [1, total_width] by layout and log-softmaxes each segment.
    static PolicyOutput from_logits(const diff::Tensor& logits, const OutputLayout& layout);
    // Constant policy from explicit probabilities (zero entries allowed).
    static PolicyOutput from_probabilities(const std::vector<std::vector<double>>& probs);

    std::size_t size() const { return log_probs.size(); }
    std::vector<double> probabilities(std::size_t dim) const;
    std::vector<double> log_probabilities(std::size_t dim) const;
    // Constant copy with no graph history (the theta_old snapshot).
    PolicyOutput detach() const;
    // Most likely choice in every dimension.
    DesignPoint mode() const;
};

enum class AlphaMode { uniform_one, log_normalized };

// Per-dimension entropy weights. log_normalized gives log(d_max)/log(d_i);
// single-choice dimensions get 0 in that mode.
std::vector<double> entropy_weights(std::span<const std::size_t> cardinalities, AlphaMode mode);

class PolicyNet {
public:
    static PolicyNet build(const DesignSpace& space, const Architecture& arch, std::uint64_t seed);

    PolicyOutput forward() const;

    const Architecture& architecture() const { return arch_; }
    const OutputLayout& layout() const { return layout_; }
    const diff::Tensor& constant_input() const { return constant_input_; }
    const std::vector<diff::Tensor>& parameters() const { return params_; }
    const std::vector<std::string>& parameter_names() const { return names_; }
    std::size_t parameter_count() const;
    std::uint64_t seed() const { return seed_; }

    std::vector<double> flat_parameters() const;
    void set_flat_parameters(std::span<const double> flat);

    // JSON header line, newline, then little-endian float64 parameters in
    // registration order.
    void save_checkpoint(const std::string& path, const DesignSpace& space) const;
    static PolicyNet load_checkpoint(const std::string& path, const DesignSpace& space);

private:
    PolicyNet() = default;
    diff::Tensor& add_param(std::string name, diff::Shape shape);
    diff::Tensor mlp_logits() const;
    diff::Tensor transformer_logits() const;

    Architecture arch_;
    OutputLayout layout_;
    std::uint64_t seed_ = 0;
    diff::Tensor constant_input_;
    std::vector<diff::Tensor> params_;
    std::vector<std::string> names_;
};

std::vector<DesignPoint> sample_designs(const PolicyOutput& out, std::size_t count, Rng& rng);

// Sum over dimensions of log f_i(x_i); differentiable.
diff::Tensor log_prob(const PolicyOutput& out, const DesignPoint& x);
std::vector<std::size_t> flat_indices(const OutputLayout& layout, const DesignPoint& x);

// alpha_i * H(f_i) per dimension, in nats.
std::vector<diff::Tensor> entropy_terms(const PolicyOutput& out, AlphaMode mode);
// D_KL(new_i || old_i) per dimension; `old` is treated as constant.
std::vector<diff::Tensor> kl_rev_terms(const PolicyOutput& current, const PolicyOutput& old);

}  // namespace theta
