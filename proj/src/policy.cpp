#include "theta/policy.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "theta/diff/ops.hpp"
#include "theta/errors.hpp"

namespace theta {

using diff::Tensor;
using nlohmann::json;

namespace {

// log of the smallest positive double; stands in for log(0) so that
// degenerate distributions stay finite.
const double kLogZero = std::log(std::numeric_limits<double>::denorm_min());

std::vector<std::size_t> parse_size_list(const std::string& text, char sep, const std::string& what) {
    std::vector<std::size_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, sep)) {
        if (item.empty() || item.find_first_not_of("0123456789") != std::string::npos) {
            throw ConfigError("bad " + what + " '" + text + "'");
        }
        out.push_back(std::stoul(item));
    }
    if (out.empty()) {
        throw ConfigError("empty " + what);
    }
    return out;
}

}  // namespace

Architecture parse_architecture(const std::string& text) {
    const auto colon = text.find(':');
    const std::string kind = text.substr(0, colon);
    const std::string rest = colon == std::string::npos ? "" : text.substr(colon + 1);
    Architecture arch;
    if (kind == "mlp") {
        MlpArch mlp;
        if (!rest.empty()) {
            const auto at = rest.find('@');
            mlp.hidden = parse_size_list(rest.substr(0, at), ',', "MLP hidden sizes");
            if (at != std::string::npos) {
                mlp.input_width = parse_size_list(rest.substr(at + 1), ',', "MLP input width").at(0);
            }
        }
        arch = mlp;
    } else if (kind == "transformer") {
        TransformerArch tf;
        if (!rest.empty()) {
            auto v = parse_size_list(rest, '-', "transformer shape");
            if (v.size() != 4) {
                throw ConfigError("transformer shape must be depth-width-heads-ff, got '" + rest + "'");
            }
            tf = {v[0], v[1], v[2], v[3]};
        }
        arch = tf;
    } else {
        throw ConfigError("unknown architecture '" + text + "' (expected mlp or transformer)");
    }
    validate_architecture(arch);
    return arch;
}

std::string architecture_string(const Architecture& arch) {
    std::ostringstream out;
    if (const auto* mlp = std::get_if<MlpArch>(&arch)) {
        out << "mlp:";
        for (std::size_t i = 0; i < mlp->hidden.size(); ++i) {
            out << (i ? "," : "") << mlp->hidden[i];
        }
        out << '@' << mlp->input_width;
    } else {
        const auto& tf = std::get<TransformerArch>(arch);
        out << "transformer:" << tf.depth << '-' << tf.width << '-' << tf.heads << '-' << tf.ff_width;
    }
    return out.str();
}

void validate_architecture(const Architecture& arch) {
    if (const auto* mlp = std::get_if<MlpArch>(&arch)) {
        if (mlp->hidden.empty() || mlp->input_width == 0 ||
            std::any_of(mlp->hidden.begin(), mlp->hidden.end(), [](std::size_t h) { return h == 0; })) {
            throw ConfigError("MLP needs at least one hidden layer and positive widths");
        }
        return;
    }
    const auto& tf = std::get<TransformerArch>(arch);
    if (tf.depth == 0 || tf.width == 0 || tf.heads == 0 || tf.ff_width == 0) {
        throw ConfigError("transformer depth, width, heads and ff width must be positive");
    }
    if (tf.width % tf.heads != 0) {
        throw ConfigError("transformer width " + std::to_string(tf.width) + " is not divisible by " +
                          std::to_string(tf.heads) + " heads");
    }
}

// --- PolicyOutput -----------------------------------------------------------

PolicyOutput PolicyOutput::from_logits(const Tensor& logits, const OutputLayout& layout) {
    if (logits.last_dim() != layout.total_width() || logits.outer() != 1) {
        throw ConfigError("policy logits of shape " + diff::shape_str(logits.shape()) + " do not match layout width " +
                          std::to_string(layout.total_width()));
    }
    PolicyOutput out;
    out.layout = layout;
    for (const auto& seg : layout.segments) {
        out.log_probs.push_back(diff::log_softmax(diff::slice(logits, seg.offset, seg.length)));
    }
    out.joint_log = diff::concat(out.log_probs);
    return out;
}

PolicyOutput PolicyOutput::from_probabilities(const std::vector<std::vector<double>>& probs) {
    PolicyOutput out;
    std::size_t offset = 0;
    for (const auto& p : probs) {
        if (p.empty()) {
            throw ConfigError("empty probability vector");
        }
        std::vector<double> logs;
        for (double v : p) {
            if (v < 0.0) {
                throw ConfigError("negative probability");
            }
            logs.push_back(v > 0.0 ? std::max(std::log(v), kLogZero) : kLogZero);
        }
        out.layout.segments.push_back({offset, p.size()});
        offset += p.size();
        out.log_probs.push_back(Tensor::from({1, p.size()}, std::move(logs)));
    }
    out.joint_log = diff::concat(out.log_probs);
    return out;
}

std::vector<double> PolicyOutput::probabilities(std::size_t dim) const {
    auto lp = log_probs.at(dim).values();
    std::vector<double> out(lp.size());
    for (std::size_t i = 0; i < lp.size(); ++i) {
        out[i] = std::exp(lp[i]);
    }
    return out;
}

std::vector<double> PolicyOutput::log_probabilities(std::size_t dim) const {
    auto lp = log_probs.at(dim).values();
    return {lp.begin(), lp.end()};
}

PolicyOutput PolicyOutput::detach() const {
    PolicyOutput out;
    out.layout = layout;
    for (const auto& t : log_probs) {
        out.log_probs.push_back(t.detach());
    }
    out.joint_log = joint_log.detach();
    return out;
}

DesignPoint PolicyOutput::mode() const {
    DesignPoint x;
    for (const auto& t : log_probs) {
        auto v = t.values();
        x.indices.push_back(static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin()));
    }
    return x;
}

std::vector<double> entropy_weights(std::span<const std::size_t> cardinalities, AlphaMode mode) {
    std::vector<double> alpha(cardinalities.size(), 1.0);
    if (mode == AlphaMode::uniform_one) {
        return alpha;
    }
    std::size_t d_max = 1;
    for (std::size_t d : cardinalities) {
        d_max = std::max(d_max, d);
    }
    for (std::size_t i = 0; i < cardinalities.size(); ++i) {
        const std::size_t d = cardinalities[i];
        alpha[i] = d <= 1 ? 0.0 : std::log(1.0 / static_cast<double>(d_max)) / std::log(1.0 / static_cast<double>(d));
    }
    return alpha;
}

// --- PolicyNet --------------------------------------------------------------

Tensor& PolicyNet::add_param(std::string name, diff::Shape shape) {
    names_.push_back(std::move(name));
    params_.push_back(Tensor::zeros(std::move(shape), true));
    return params_.back();
}

namespace {

void xavier_fill(Tensor& t, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (double& v : t.mutable_values()) {
        v = rng.uniform(-limit, limit);
    }
}

}  // namespace

PolicyNet PolicyNet::build(const DesignSpace& space, const Architecture& arch, std::uint64_t seed) {
    validate_architecture(arch);
    PolicyNet net;
    net.arch_ = arch;
    net.layout_ = space.output_layout();
    net.seed_ = seed;
    Rng rng(seed);
    const std::size_t total = net.layout_.total_width();

    if (const auto* mlp = std::get_if<MlpArch>(&arch)) {
        net.constant_input_ = Tensor::filled({1, mlp->input_width}, 1.0);
        std::size_t prev = mlp->input_width;
        for (std::size_t l = 0; l < mlp->hidden.size(); ++l) {
            const std::size_t h = mlp->hidden[l];
            xavier_fill(net.add_param("mlp." + std::to_string(l) + ".weight", {prev, h}), prev, h, rng);
            net.add_param("mlp." + std::to_string(l) + ".bias", {h});
            prev = h;
        }
        net.add_param("head.weight", {prev, total});
        net.add_param("head.bias", {total});
        return net;
    }

    const auto& tf = std::get<TransformerArch>(arch);
    const std::size_t dims = space.size();
    const std::size_t w = tf.width;
    std::vector<double> eye(dims * dims, 0.0);
    for (std::size_t i = 0; i < dims; ++i) {
        eye[i * dims + i] = 1.0;
    }
    net.constant_input_ = Tensor::from({dims, dims}, std::move(eye));
    xavier_fill(net.add_param("embed", {dims, w}), dims, w, rng);
    for (std::size_t l = 0; l < tf.depth; ++l) {
        const std::string p = "block" + std::to_string(l) + ".";
        for (double& v : net.add_param(p + "ln1.gain", {w}).mutable_values()) v = 1.0;
        net.add_param(p + "ln1.bias", {w});
        for (const char* proj : {"q", "k", "v", "o"}) {
            xavier_fill(net.add_param(p + "attn." + proj + ".weight", {w, w}), w, w, rng);
            net.add_param(p + "attn." + proj + ".bias", {w});
        }
        for (double& v : net.add_param(p + "ln2.gain", {w}).mutable_values()) v = 1.0;
        net.add_param(p + "ln2.bias", {w});
        xavier_fill(net.add_param(p + "ff1.weight", {w, tf.ff_width}), w, tf.ff_width, rng);
        net.add_param(p + "ff1.bias", {tf.ff_width});
        xavier_fill(net.add_param(p + "ff2.weight", {tf.ff_width, w}), tf.ff_width, w, rng);
        net.add_param(p + "ff2.bias", {w});
    }
    for (double& v : net.add_param("ln_f.gain", {w}).mutable_values()) v = 1.0;
    net.add_param("ln_f.bias", {w});
    for (std::size_t i = 0; i < dims; ++i) {
        const std::size_t d = net.layout_.segments[i].length;
        net.add_param("head" + std::to_string(i) + ".weight", {w, d});
        net.add_param("head" + std::to_string(i) + ".bias", {d});
    }
    return net;
}

Tensor PolicyNet::mlp_logits() const {
    const auto& mlp = std::get<MlpArch>(arch_);
    Tensor h = constant_input_;
    std::size_t k = 0;
    for (std::size_t l = 0; l < mlp.hidden.size(); ++l) {
        h = diff::relu(diff::matmul(h, params_[k]) + params_[k + 1]);
        k += 2;
    }
    return diff::matmul(h, params_[k]) + params_[k + 1];
}

Tensor PolicyNet::transformer_logits() const {
    const auto& tf = std::get<TransformerArch>(arch_);
    const std::size_t head_width = tf.width / tf.heads;
    const double score_scale = 1.0 / std::sqrt(static_cast<double>(head_width));
    std::size_t k = 0;
    auto next = [&]() -> const Tensor& { return params_[k++]; };

    Tensor x = diff::matmul(constant_input_, next());
    for (std::size_t l = 0; l < tf.depth; ++l) {
        const Tensor& g1 = next();
        const Tensor& b1 = next();
        Tensor h = diff::layer_norm(x, g1, b1);
        const Tensor& wq = next();
        const Tensor& bq = next();
        const Tensor& wk = next();
        const Tensor& bk = next();
        const Tensor& wv = next();
        const Tensor& bv = next();
        const Tensor& wo = next();
        const Tensor& bo = next();
        Tensor q = diff::matmul(h, wq) + bq;
        Tensor kk = diff::matmul(h, wk) + bk;
        Tensor v = diff::matmul(h, wv) + bv;
        std::vector<Tensor> heads;
        for (std::size_t a = 0; a < tf.heads; ++a) {
            const std::size_t off = a * head_width;
            Tensor qa = diff::slice(q, off, head_width);
            Tensor ka = diff::slice(kk, off, head_width);
            Tensor va = diff::slice(v, off, head_width);
            Tensor attn = diff::softmax(diff::scale(diff::matmul(qa, diff::transpose(ka)), score_scale));
            heads.push_back(diff::matmul(attn, va));
        }
        x = x + (diff::matmul(diff::concat(heads), wo) + bo);

        const Tensor& g2 = next();
        const Tensor& b2 = next();
        const Tensor& w1 = next();
        const Tensor& c1 = next();
        const Tensor& w2 = next();
        const Tensor& c2 = next();
        Tensor f = diff::relu(diff::matmul(diff::layer_norm(x, g2, b2), w1) + c1);
        x = x + (diff::matmul(f, w2) + c2);
    }
    const Tensor& gf = next();
    const Tensor& bf = next();
    x = diff::layer_norm(x, gf, bf);
    std::vector<Tensor> logits;
    for (std::size_t i = 0; i < layout_.segments.size(); ++i) {
        const Tensor& wh = next();
        const Tensor& bh = next();
        logits.push_back(diff::matmul(diff::slice_rows(x, i, 1), wh) + bh);
    }
    return diff::concat(logits);
}

PolicyOutput PolicyNet::forward() const {
    Tensor logits = std::holds_alternative<MlpArch>(arch_) ? mlp_logits() : transformer_logits();
    return PolicyOutput::from_logits(logits, layout_);
}

std::size_t PolicyNet::parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) {
        n += p.numel();
    }
    return n;
}

std::vector<double> PolicyNet::flat_parameters() const {
    std::vector<double> flat;
    flat.reserve(parameter_count());
    for (const auto& p : params_) {
        auto v = p.values();
        flat.insert(flat.end(), v.begin(), v.end());
    }
    return flat;
}

void PolicyNet::set_flat_parameters(std::span<const double> flat) {
    if (flat.size() != parameter_count()) {
        throw ConfigError("parameter vector has " + std::to_string(flat.size()) + " entries, expected " +
                          std::to_string(parameter_count()));
    }
    std::size_t pos = 0;
    for (auto& p : params_) {
        auto v = p.mutable_values();
        std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(pos), v.size(), v.begin());
        pos += v.size();
    }
}

void PolicyNet::save_checkpoint(const std::string& path, const DesignSpace& space) const {
    json tensors = json::array();
    for (std::size_t i = 0; i < params_.size(); ++i) {
        tensors.push_back({{"name", names_[i]}, {"shape", params_[i].shape()}});
    }
    json header{{"format", "theta-dse-checkpoint"},
                {"version", 1},
                {"architecture", architecture_string(arch_)},
                {"space_hash", space.hash()},
                {"seed", seed_},
                {"parameter_count", parameter_count()},
                {"tensors", tensors}};
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ConfigError("cannot write checkpoint '" + path + "'");
    }
    out << header.dump() << '\n';
    for (double v : flat_parameters()) {
        auto bits = std::bit_cast<std::uint64_t>(v);
        unsigned char bytes[8];
        for (int b = 0; b < 8; ++b) {
            bytes[b] = static_cast<unsigned char>(bits >> (8 * b));
        }
        out.write(reinterpret_cast<const char*>(bytes), 8);
    }
}

PolicyNet PolicyNet::load_checkpoint(const std::string& path, const DesignSpace& space) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ParseError("cannot open checkpoint '" + path + "'");
    }
    std::string line;
    std::getline(in, line);
    json header;
    try {
        header = json::parse(line);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("checkpoint header is not JSON: ") + e.what());
    }
    if (header.value("format", "") != "theta-dse-checkpoint") {
        throw ParseError("not a checkpoint file: '" + path + "'");
    }
    if (header.value("space_hash", "") != space.hash()) {
        throw ParseError("checkpoint was written for a different design space");
    }
    PolicyNet net = build(space, parse_architecture(header.at("architecture").get<std::string>()),
                          header.at("seed").get<std::uint64_t>());
    const std::size_t n = header.at("parameter_count").get<std::size_t>();
    if (n != net.parameter_count()) {
        throw ParseError("checkpoint parameter count does not match its architecture");
    }
    std::vector<double> flat(n);
    for (double& v : flat) {
        unsigned char bytes[8];
        if (!in.read(reinterpret_cast<char*>(bytes), 8)) {
            throw ParseError("checkpoint parameter blob is truncated");
        }
        std::uint64_t bits = 0;
        for (int b = 0; b < 8; ++b) {
            bits |= static_cast<std::uint64_t>(bytes[b]) << (8 * b);
        }
        v = std::bit_cast<double>(bits);
    }
    net.set_flat_parameters(flat);
    return net;
}

// --- sampling and statistics ------------------------------------------------

std::vector<DesignPoint> sample_designs(const PolicyOutput& out, std::size_t count, Rng& rng) {
    std::vector<std::vector<double>> probs;
    for (std::size_t i = 0; i < out.size(); ++i) {
        probs.push_back(out.probabilities(i));
    }
    std::vector<DesignPoint> samples(count);
    for (auto& x : samples) {
        x.indices.resize(probs.size());
        for (std::size_t i = 0; i < probs.size(); ++i) {
            const auto& p = probs[i];
            // Inverse CDF; falls back to the last positive entry when
            // rounding leaves u above the final cumulative sum.
            const double u = rng.uniform01();
            double cum = 0.0;
            std::size_t pick = p.size();
            std::size_t last_positive = 0;
            for (std::size_t c = 0; c < p.size(); ++c) {
                if (p[c] > 0.0) {
                    last_positive = c;
                }
                cum += p[c];
                if (u < cum && p[c] > 0.0) {
                    pick = c;
                    break;
                }
            }
            x.indices[i] = pick == p.size() ? last_positive : pick;
        }
    }
    return samples;
}

std::vector<std::size_t> flat_indices(const OutputLayout& layout, const DesignPoint& x) {
    if (x.indices.size() != layout.segments.size()) {
        throw ConfigError("design point has " + std::to_string(x.indices.size()) + " dimensions, policy has " +
                          std::to_string(layout.segments.size()));
    }
    std::vector<std::size_t> flat(x.indices.size());
    for (std::size_t i = 0; i < flat.size(); ++i) {
        if (x.indices[i] >= layout.segments[i].length) {
            throw ConfigError("design point index out of range in dimension " + std::to_string(i));
        }
        flat[i] = layout.segments[i].offset + x.indices[i];
    }
    return flat;
}

Tensor log_prob(const PolicyOutput& out, const DesignPoint& x) {
    const auto idx = flat_indices(out.layout, x);
    return diff::gather_sum(out.joint_log, idx);
}

std::vector<Tensor> entropy_terms(const PolicyOutput& out, AlphaMode mode) {
    std::vector<std::size_t> cards;
    for (const auto& seg : out.layout.segments) {
        cards.push_back(seg.length);
    }
    const auto alpha = entropy_weights(cards, mode);
    std::vector<Tensor> terms;
    for (std::size_t i = 0; i < out.size(); ++i) {
        const Tensor& lp = out.log_probs[i];
        Tensor h = diff::neg(diff::sum(diff::exp(lp) * lp));
        terms.push_back(alpha[i] == 1.0 ? h : diff::scale(h, alpha[i]));
    }
    return terms;
}

std::vector<Tensor> kl_rev_terms(const PolicyOutput& current, const PolicyOutput& old) {
    if (current.size() != old.size()) {
        throw ConfigError("KL between policies over different spaces");
    }
    std::vector<Tensor> terms;
    for (std::size_t i = 0; i < current.size(); ++i) {
        const Tensor& lp = current.log_probs[i];
        if (lp.numel() != old.log_probs[i].numel()) {
            throw ConfigError("KL between policies over different spaces");
        }
        terms.push_back(diff::sum(diff::exp(lp) * (lp - old.log_probs[i].detach())));
    }
    return terms;
}

}  // namespace theta
