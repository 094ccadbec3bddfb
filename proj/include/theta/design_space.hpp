#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace theta {

struct Dimension {
    std::string name;
    std::vector<std::string> choices;

    std::size_t cardinality() const { return choices.size(); }
    bool operator==(const Dimension&) const = default;
};

// A compound action: one choice index per dimension.
struct DesignPoint {
    std::vector<std::size_t> indices;

    bool operator==(const DesignPoint&) const = default;
    auto operator<=>(const DesignPoint&) const = default;
};

struct Segment {
    std::size_t offset;
    std::size_t length;
    bool operator==(const Segment&) const = default;
};

// Where each dimension's logits live in the flat policy output.
struct OutputLayout {
    std::vector<Segment> segments;
    std::size_t total_width() const;
};

// Ordered categorical dimensions. Immutable once built; the constructor
// enforces non-empty dimensions and unique names and labels.
class DesignSpace {
public:
    DesignSpace(std::string name, std::vector<Dimension> dimensions);

    // Uniform D x d space with generated labels ("dim0", "c0", ...).
    static DesignSpace uniform(std::size_t dims, std::size_t choices, std::string name = "synthetic");
    static DesignSpace from_cardinalities(const std::vector<std::size_t>& cards, std::string name = "synthetic");

    const std::string& name() const { return name_; }
    const std::vector<Dimension>& dimensions() const { return dimensions_; }
    const Dimension& dimension(std::size_t i) const { return dimensions_.at(i); }
    std::size_t size() const { return dimensions_.size(); }
    std::vector<std::size_t> cardinalities() const;
    std::size_t max_cardinality() const;

    std::size_t total_width() const;
    // Product of cardinalities as a double.
    double space_size() const;
    // Exact product when it fits in 128 bits, as a decimal string.
    std::optional<std::string> space_size_exact() const;

    OutputLayout output_layout() const;

    bool contains(const DesignPoint& x) const;
    void validate(const DesignPoint& x) const;

    // Wire form {"<dim>": "<label>", ...}
    nlohmann::json to_wire(const DesignPoint& x) const;
    DesignPoint from_wire(const nlohmann::json& wire) const;
    std::string describe(const DesignPoint& x) const;

    // FNV-1a over the canonical JSON serialization, as 16 hex digits.
    std::string hash() const;

    bool operator==(const DesignSpace&) const = default;

private:
    std::string name_;
    std::vector<Dimension> dimensions_;
};

DesignSpace parse_space(const nlohmann::json& document);
DesignSpace parse_space_text(const std::string& text);
DesignSpace load_space(const std::string& path);
nlohmann::json serialize_space(const DesignSpace& space);

// Per-dimension choice counts of the bundled SoC-shaped space (D = 18).
const std::vector<std::size_t>& soc_cardinalities();
DesignSpace soc_space();

}  // namespace theta
