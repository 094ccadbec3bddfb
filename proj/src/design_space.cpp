#include "theta/design_space.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "theta/errors.hpp"

namespace theta {

using nlohmann::json;

std::size_t OutputLayout::total_width() const {
    return segments.empty() ? 0 : segments.back().offset + segments.back().length;
}

DesignSpace::DesignSpace(std::string name, std::vector<Dimension> dimensions)
    : name_(std::move(name)), dimensions_(std::move(dimensions)) {
    if (dimensions_.empty()) {
        throw ParseError("design space '" + name_ + "' has no dimensions");
    }
    std::set<std::string> names;
    for (const auto& d : dimensions_) {
        if (d.name.empty()) {
            throw ParseError("design space '" + name_ + "' has a dimension with an empty name");
        }
        if (!names.insert(d.name).second) {
            throw ParseError("duplicate dimension name '" + d.name + "'");
        }
        if (d.choices.empty()) {
            throw ParseError("dimension '" + d.name + "' has no choices");
        }
        std::set<std::string> labels(d.choices.begin(), d.choices.end());
        if (labels.size() != d.choices.size()) {
            throw ParseError("dimension '" + d.name + "' has duplicate choice labels");
        }
    }
}

DesignSpace DesignSpace::uniform(std::size_t dims, std::size_t choices, std::string name) {
    return from_cardinalities(std::vector<std::size_t>(dims, choices), std::move(name));
}

DesignSpace DesignSpace::from_cardinalities(const std::vector<std::size_t>& cards, std::string name) {
    std::vector<Dimension> dims;
    for (std::size_t i = 0; i < cards.size(); ++i) {
        Dimension d{"dim" + std::to_string(i), {}};
        for (std::size_t c = 0; c < cards[i]; ++c) {
            d.choices.push_back("c" + std::to_string(c));
        }
        dims.push_back(std::move(d));
    }
    return DesignSpace(std::move(name), std::move(dims));
}

std::vector<std::size_t> DesignSpace::cardinalities() const {
    std::vector<std::size_t> out;
    for (const auto& d : dimensions_) {
        out.push_back(d.cardinality());
    }
    return out;
}

std::size_t DesignSpace::max_cardinality() const {
    std::size_t m = 0;
    for (const auto& d : dimensions_) {
        m = std::max(m, d.cardinality());
    }
    return m;
}

std::size_t DesignSpace::total_width() const {
    std::size_t w = 0;
    for (const auto& d : dimensions_) {
        w += d.cardinality();
    }
    return w;
}

double DesignSpace::space_size() const {
    long double p = 1.0L;
    for (const auto& d : dimensions_) {
        p *= static_cast<long double>(d.cardinality());
    }
    return static_cast<double>(p);
}

std::optional<std::string> DesignSpace::space_size_exact() const {
    unsigned __int128 p = 1;
    for (const auto& d : dimensions_) {
        unsigned __int128 next = p * d.cardinality();
        if (next / d.cardinality() != p) {
            return std::nullopt;
        }
        p = next;
    }
    std::string digits;
    do {
        digits.push_back(static_cast<char>('0' + static_cast<int>(p % 10)));
        p /= 10;
    } while (p != 0);
    return std::string(digits.rbegin(), digits.rend());
}

OutputLayout DesignSpace::output_layout() const {
    OutputLayout layout;
    std::size_t offset = 0;
    for (const auto& d : dimensions_) {
        layout.segments.push_back({offset, d.cardinality()});
        offset += d.cardinality();
    }
    return layout;
}

bool DesignSpace::contains(const DesignPoint& x) const {
    if (x.indices.size() != dimensions_.size()) {
        return false;
    }
    for (std::size_t i = 0; i < x.indices.size(); ++i) {
        if (x.indices[i] >= dimensions_[i].cardinality()) {
            return false;
        }
    }
    return true;
}

void DesignSpace::validate(const DesignPoint& x) const {
    if (!contains(x)) {
        throw ConfigError("design point is not valid for space '" + name_ + "'");
    }
}

json DesignSpace::to_wire(const DesignPoint& x) const {
    validate(x);
    json out = json::object();
    for (std::size_t i = 0; i < x.indices.size(); ++i) {
        out[dimensions_[i].name] = dimensions_[i].choices[x.indices[i]];
    }
    return out;
}

DesignPoint DesignSpace::from_wire(const json& wire) const {
    if (!wire.is_object() || wire.size() != dimensions_.size()) {
        throw ParseError("design point must be an object with one entry per dimension");
    }
    DesignPoint x;
    for (const auto& d : dimensions_) {
        auto it = wire.find(d.name);
        if (it == wire.end() || !it->is_string()) {
            throw ParseError("design point is missing dimension '" + d.name + "'");
        }
        auto pos = std::find(d.choices.begin(), d.choices.end(), it->get<std::string>());
        if (pos == d.choices.end()) {
            throw ParseError("unknown choice '" + it->get<std::string>() + "' for dimension '" + d.name + "'");
        }
        x.indices.push_back(static_cast<std::size_t>(pos - d.choices.begin()));
    }
    return x;
}

std::string DesignSpace::describe(const DesignPoint& x) const { return to_wire(x).dump(); }

std::string DesignSpace::hash() const {
    const std::string canonical = serialize_space(*this).dump();
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : canonical) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

DesignSpace parse_space(const json& document) {
    if (!document.is_object()) {
        throw ParseError("design space document must be a JSON object");
    }
    auto name_it = document.find("name");
    if (name_it == document.end() || !name_it->is_string()) {
        throw ParseError("design space document needs a string 'name'");
    }
    auto dims_it = document.find("dimensions");
    if (dims_it == document.end() || !dims_it->is_array()) {
        throw ParseError("design space document needs a 'dimensions' array");
    }
    std::vector<Dimension> dims;
    for (std::size_t i = 0; i < dims_it->size(); ++i) {
        const auto& entry = (*dims_it)[i];
        const std::string where = "dimension #" + std::to_string(i);
        if (!entry.is_object() || !entry.contains("name") || !entry["name"].is_string()) {
            throw ParseError(where + " needs a string 'name'");
        }
        Dimension d{entry["name"].get<std::string>(), {}};
        if (!entry.contains("choices") || !entry["choices"].is_array()) {
            throw ParseError("dimension '" + d.name + "' needs a 'choices' array");
        }
        for (const auto& c : entry["choices"]) {
            if (!c.is_string()) {
                throw ParseError("dimension '" + d.name + "' has a non-string choice label");
            }
            d.choices.push_back(c.get<std::string>());
        }
        dims.push_back(std::move(d));
    }
    return DesignSpace(name_it->get<std::string>(), std::move(dims));
}

DesignSpace parse_space_text(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("design space is not valid JSON: ") + e.what());
    }
    return parse_space(doc);
}

DesignSpace load_space(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open design space file '" + path + "'");
    }
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_space_text(buf.str());
}

json serialize_space(const DesignSpace& space) {
    json dims = json::array();
    for (const auto& d : space.dimensions()) {
        dims.push_back({{"name", d.name}, {"choices", d.choices}});
    }
    return {{"name", space.name()}, {"dimensions", dims}};
}

const std::vector<std::size_t>& soc_cardinalities() {
    static const std::vector<std::size_t> cards{2, 12, 3, 2, 3, 3, 4, 7, 13, 10, 5, 10, 5, 6, 7, 5, 7, 2};
    return cards;
}

DesignSpace soc_space() {
    // Placeholder labels; only the cardinalities are meaningful.
    static const std::vector<std::string> names{
        "cpu_type",        "mem_type",        "l1d_size",       "l1d_assoc",        "l1i_size",
        "l1i_assoc",       "l2_size",         "l2_assoc",       "cpu_clock",        "num_cores",
        "mem_channels",    "acc_clock",       "acc_cache_size", "acc_cache_assoc",  "acc_cache_ports",
        "acc_bus_width",   "acc_tlb_entries", "acc_dma"};
    const auto& cards = soc_cardinalities();
    std::vector<Dimension> dims;
    for (std::size_t i = 0; i < cards.size(); ++i) {
        Dimension d{names[i], {}};
        for (std::size_t c = 0; c < cards[i]; ++c) {
            d.choices.push_back(names[i] + "_" + std::to_string(c));
        }
        dims.push_back(std::move(d));
    }
    return DesignSpace("soc", std::move(dims));
}

}  // namespace theta
