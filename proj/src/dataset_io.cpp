#include "stm/dataset_io.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>

#include "stm/similarity.hpp"

namespace stm {
namespace {

namespace fs = std::filesystem;

constexpr std::array<char, 4> kFeatureMagic{'S', 'T', 'M', 'F'};
constexpr std::uint32_t kFeatureVersion = 1;

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto comma = line.find(',', start);
        out.push_back(trim(line.substr(start, comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

std::optional<double> parse_real(std::string_view s) {
    double v = 0.0;
    const auto* end = s.data() + s.size();
    const auto res = std::from_chars(s.data(), end, v);
    if (res.ec != std::errc{} || res.ptr != end || !std::isfinite(v)) return std::nullopt;
    return v;
}

/// Line-oriented CSV reader that skips blank lines and checks the header.
class CsvReader {
public:
    CsvReader(const fs::path& path, std::initializer_list<std::string_view> header)
        : path_(path), in_(path) {
        if (!in_) throw FileError("cannot open " + path.string());
        std::string line;
        while (std::getline(in_, line)) {
            ++line_no_;
            if (!trim(line).empty()) break;
            line.clear();
        }
        const auto fields = split_fields(line);
        std::size_t k = 0;
        for (auto expected : header) {
            if (k >= fields.size() || fields[k] != expected) {
                fail("expected header beginning with '" + join(header) + "'");
            }
            ++k;
        }
        header_fields_ = fields.size();
    }

    bool next(std::vector<std::string_view>& fields) {
        while (std::getline(in_, line_)) {
            ++line_no_;
            if (trim(line_).empty()) continue;
            fields = split_fields(line_);
            return true;
        }
        return false;
    }

    [[noreturn]] void fail(const std::string& what) const {
        throw ParseError(path_.string(), line_no_, what);
    }

    std::size_t line() const noexcept { return line_no_; }
    std::size_t header_fields() const noexcept { return header_fields_; }

private:
    static std::string join(std::initializer_list<std::string_view> parts) {
        std::string s;
        for (auto p : parts) {
            if (!s.empty()) s += ',';
            s += p;
        }
        return s;
    }

    fs::path path_;
    std::ifstream in_;
    std::string line_;
    std::size_t line_no_ = 0;
    std::size_t header_fields_ = 0;
};

/// Maps external ids to dense indices in first-seen order.
class IdTable {
public:
    Index size() const noexcept { return static_cast<Index>(ids_.size()); }
    const std::vector<std::string>& ids() const noexcept { return ids_; }

    std::optional<Index> find(std::string_view id) const {
        const auto it = index_.find(std::string(id));
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    /// Returns the index and whether the id was new.
    std::pair<Index, bool> intern(std::string_view id) {
        auto [it, inserted] = index_.emplace(std::string(id), size());
        if (inserted) ids_.emplace_back(id);
        return {it->second, inserted};
    }

private:
    std::vector<std::string> ids_;
    std::unordered_map<std::string, Index> index_;
};

bool has_binary_magic(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FileError("cannot open " + path.string());
    std::array<char, 4> magic{};
    in.read(magic.data(), magic.size());
    return in.gcount() == 4 && magic == kFeatureMagic;
}

void put_u32(std::ostream& out, std::uint32_t v) {
    const std::array<unsigned char, 4> b{
        static_cast<unsigned char>(v & 0xFFu), static_cast<unsigned char>((v >> 8) & 0xFFu),
        static_cast<unsigned char>((v >> 16) & 0xFFu), static_cast<unsigned char>((v >> 24) & 0xFFu)};
    out.write(reinterpret_cast<const char*>(b.data()), 4);
}

std::uint32_t get_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

struct LoadedFeatures {
    FeatureMatrix features;
    IdTable items;
};

LoadedFeatures read_features_csv(const fs::path& path) {
    CsvReader csv(path, {"item"});
    const std::size_t width = csv.header_fields();
    if (width < 2) csv.fail("features header must list at least one feature column");
    const auto d = static_cast<Index>(width - 1);
    IdTable items;
    std::vector<double> values;
    std::vector<std::string_view> fields;
    while (csv.next(fields)) {
        if (fields.size() != width) {
            throw SchemaError(path.string() + ":" + std::to_string(csv.line()) + ": item row has " +
                              std::to_string(fields.size() - 1) + " feature values, expected " +
                              std::to_string(d));
        }
        if (fields[0].empty()) csv.fail("empty item id");
        if (!items.intern(fields[0]).second) {
            csv.fail("duplicate item id '" + std::string(fields[0]) + "'");
        }
        for (std::size_t k = 1; k < width; ++k) {
            const auto v = parse_real(fields[k]);
            if (!v) csv.fail("invalid feature value '" + std::string(fields[k]) + "'");
            values.push_back(*v);
        }
    }
    const Index M = items.size();
    Matrix X = Eigen::Map<const Matrix>(values.data(), d, M);
    return {FeatureMatrix(std::move(X)), std::move(items)};
}

LoadedFeatures read_features_any(const fs::path& path) {
    if (has_binary_magic(path)) {
        LoadedFeatures out{read_features_binary(path), {}};
        for (Index j = 0; j < out.features.n_items(); ++j) out.items.intern(std::to_string(j));
        return out;
    }
    return read_features_csv(path);
}

std::string format_real(double v) {
    std::ostringstream os;
    os << std::setprecision(std::numeric_limits<double>::max_digits10) << v;
    return os.str();
}

} // namespace

FeatureMatrix read_features_binary(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw FileError("cannot open " + file.string());
    std::array<unsigned char, 16> header{};
    in.read(reinterpret_cast<char*>(header.data()), header.size());
    if (in.gcount() != 16 || std::memcmp(header.data(), kFeatureMagic.data(), 4) != 0) {
        throw SchemaError(file.string() + ": missing STMF header");
    }
    const auto version = get_u32(header.data() + 4);
    if (version != kFeatureVersion) {
        throw SchemaError(file.string() + ": unsupported feature container version " +
                          std::to_string(version));
    }
    const auto d = static_cast<Index>(get_u32(header.data() + 8));
    const auto M = static_cast<Index>(get_u32(header.data() + 12));
    const auto count = static_cast<std::size_t>(d) * static_cast<std::size_t>(M);
    std::vector<unsigned char> payload(count * 4);
    in.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
    if (static_cast<std::size_t>(in.gcount()) != payload.size() || in.peek() != EOF) {
        throw SchemaError(file.string() + ": payload size does not match d=" + std::to_string(d) +
                          ", M=" + std::to_string(M));
    }
    Matrix X(d, M);
    for (std::size_t k = 0; k < count; ++k) {
        const std::uint32_t bits = get_u32(payload.data() + 4 * k);
        float f = 0.0F;
        std::memcpy(&f, &bits, sizeof f);
        X.data()[k] = static_cast<double>(f);
    }
    if (!X.allFinite()) throw SchemaError(file.string() + ": non-finite feature value");
    return FeatureMatrix(std::move(X));
}

void write_features_binary(const FeatureMatrix& features, const fs::path& file) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw FileError("cannot write " + file.string());
    out.write(kFeatureMagic.data(), 4);
    put_u32(out, kFeatureVersion);
    put_u32(out, static_cast<std::uint32_t>(features.dim()));
    put_u32(out, static_cast<std::uint32_t>(features.n_items()));
    const auto count = static_cast<std::size_t>(features.X.size());
    for (std::size_t k = 0; k < count; ++k) {
        const auto f = static_cast<float>(features.X.data()[k]);
        std::uint32_t bits = 0;
        std::memcpy(&bits, &f, sizeof bits);
        put_u32(out, bits);
    }
}

Dataset ingest_dataset(const fs::path& ratings_file, const fs::path& features_file,
                       const std::optional<fs::path>& social_file,
                       const std::optional<fs::path>& groups_file, const IngestOptions& options) {
    for (const auto* p : {&ratings_file, &features_file}) {
        if (!fs::exists(*p)) throw FileError("missing input file " + p->string());
    }
    auto [features, items] = read_features_any(features_file);

    IdTable users;
    const bool fixed_users = options.users_file.has_value();
    if (fixed_users) {
        if (!fs::exists(*options.users_file)) {
            throw FileError("missing input file " + options.users_file->string());
        }
        CsvReader csv(*options.users_file, {"user"});
        std::vector<std::string_view> fields;
        while (csv.next(fields)) {
            if (fields.size() != 1 || fields[0].empty()) csv.fail("expected a single user id");
            if (!users.intern(fields[0]).second) {
                csv.fail("duplicate user id '" + std::string(fields[0]) + "'");
            }
        }
    }
    auto resolve_user = [&](CsvReader& csv, std::string_view id) -> Index {
        if (id.empty()) csv.fail("empty user id");
        if (fixed_users) {
            const auto u = users.find(id);
            if (!u) {
                throw SchemaError("line " + std::to_string(csv.line()) + ": user '" +
                                  std::string(id) + "' is not listed in the users file");
            }
            return *u;
        }
        return users.intern(id).first;
    };

    std::vector<Rating> entries;
    {
        CsvReader csv(ratings_file, {"user", "item", "value"});
        std::unordered_map<std::uint64_t, std::size_t> seen;
        std::vector<std::string_view> fields;
        while (csv.next(fields)) {
            if (fields.size() != 3) {
                csv.fail("expected 3 fields (user,item,value), got " + std::to_string(fields.size()));
            }
            const auto value = parse_real(fields[2]);
            if (!value) csv.fail("invalid rating value '" + std::string(fields[2]) + "'");
            const auto item = items.find(fields[1]);
            if (!item) {
                throw SchemaError(ratings_file.string() + ":" + std::to_string(csv.line()) +
                                  ": item '" + std::string(fields[1]) +
                                  "' has no row in the features file");
            }
            const Index user = resolve_user(csv, fields[0]);
            const auto key = (static_cast<std::uint64_t>(user) << 32) ^ static_cast<std::uint64_t>(*item);
            if (const auto [it, fresh] = seen.emplace(key, csv.line()); !fresh) {
                csv.fail("duplicate rating for (" + std::string(fields[0]) + ", " +
                         std::string(fields[1]) + "), first seen on line " +
                         std::to_string(it->second));
            }
            entries.push_back({user, *item, *value});
        }
    }

    std::vector<std::tuple<Index, Index, double, std::size_t>> raw_links;
    if (social_file) {
        if (!fs::exists(*social_file)) throw FileError("missing input file " + social_file->string());
        CsvReader csv(*social_file, {"user_a", "user_b", "similarity"});
        std::vector<std::string_view> fields;
        while (csv.next(fields)) {
            if (fields.size() != 3) csv.fail("expected 3 fields (user_a,user_b,similarity)");
            const auto sim = parse_real(fields[2]);
            if (!sim || *sim < 0.0 || *sim > 1.0) {
                csv.fail("similarity must be a real in [0,1], got '" + std::string(fields[2]) + "'");
            }
            const Index a = resolve_user(csv, fields[0]);
            const Index b = resolve_user(csv, fields[1]);
            if (a == b) csv.fail("self-edge for user '" + std::string(fields[0]) + "'");
            raw_links.emplace_back(a, b, *sim, csv.line());
        }
    }

    std::vector<std::pair<Index, std::string>> memberships;
    if (groups_file) {
        if (!fs::exists(*groups_file)) throw FileError("missing input file " + groups_file->string());
        CsvReader csv(*groups_file, {"user", "group"});
        std::vector<std::string_view> fields;
        while (csv.next(fields)) {
            if (fields.size() != 2 || fields[1].empty()) csv.fail("expected 2 fields (user,group)");
            memberships.emplace_back(resolve_user(csv, fields[0]), std::string(fields[1]));
        }
    }

    const Index N = users.size();
    const Index M = features.n_items();

    Dataset data;
    data.ratings = RatingMatrix(N, M, std::move(entries));
    if (social_file) {
        std::vector<SocialLink> links;
        std::unordered_map<std::uint64_t, std::pair<double, std::size_t>> seen;
        for (const auto& [a, b, sim, line] : raw_links) {
            const auto lo = std::min(a, b);
            const auto hi = std::max(a, b);
            const auto key = (static_cast<std::uint64_t>(lo) << 32) ^ static_cast<std::uint64_t>(hi);
            if (const auto [it, fresh] = seen.emplace(key, std::pair{sim, line}); !fresh) {
                if (it->second.first != sim) {
                    throw ParseError(social_file->string(), line,
                                     "similarity disagrees with the reverse link on line " +
                                         std::to_string(it->second.second));
                }
                continue;
            }
            links.push_back({lo, hi, sim});
        }
        data.social = SocialGraph(N, links);
    }
    if (groups_file) {
        // Universe sorted by name so the representation does not depend on row order.
        GroupMembership g;
        for (const auto& m : memberships) g.universe.push_back(m.second);
        std::sort(g.universe.begin(), g.universe.end());
        g.universe.erase(std::unique(g.universe.begin(), g.universe.end()), g.universe.end());
        g.groups.resize(static_cast<std::size_t>(N));
        for (const auto& [u, name] : memberships) {
            const auto gid = static_cast<Index>(
                std::lower_bound(g.universe.begin(), g.universe.end(), name) - g.universe.begin());
            auto& set = g.groups[static_cast<std::size_t>(u)];
            if (std::find(set.begin(), set.end(), gid) == set.end()) set.push_back(gid);
        }
        for (auto& set : g.groups) std::sort(set.begin(), set.end());
        data.groups = std::move(g);
    }
    if (options.standardize) standardize(features);
    data.features = std::move(features);
    data.user_ids = users.ids();
    data.item_ids = items.ids();
    data.validate();
    return data;
}

Dataset load_data_dir(const fs::path& dir, IngestOptions options) {
    if (!fs::is_directory(dir)) throw FileError("data directory not found: " + dir.string());
    const auto bin = dir / DataDirLayout::features_bin;
    const auto features = fs::exists(bin) ? bin : dir / DataDirLayout::features_csv;
    auto optional_file = [&](const char* name) -> std::optional<fs::path> {
        const auto p = dir / name;
        return fs::exists(p) ? std::optional<fs::path>(p) : std::nullopt;
    };
    if (!options.users_file) options.users_file = optional_file(DataDirLayout::users);
    const auto social = optional_file(DataDirLayout::social);
    const auto groups = optional_file(DataDirLayout::groups);
    auto data = ingest_dataset(dir / DataDirLayout::ratings, features, social, groups, options);
    if (!data.social && data.groups) {
        auto graph = social_similarity_from_groups(*data.groups);
        data.social = std::move(graph);
    }
    return data;
}

void write_data_dir(const Dataset& data, const fs::path& dir, FeatureFormat format) {
    fs::create_directories(dir);
    auto open = [&](const char* name) {
        std::ofstream out(dir / name);
        if (!out) throw FileError("cannot write " + (dir / name).string());
        return out;
    };
    auto user_id = [&](Index u) {
        return data.user_ids.empty() ? std::to_string(u) : data.user_ids[static_cast<std::size_t>(u)];
    };
    auto item_id = [&](Index j) {
        return data.item_ids.empty() ? std::to_string(j) : data.item_ids[static_cast<std::size_t>(j)];
    };
    {
        auto out = open(DataDirLayout::users);
        out << "user\n";
        for (Index u = 0; u < data.n_users(); ++u) out << user_id(u) << '\n';
    }
    {
        auto out = open(DataDirLayout::ratings);
        out << "user,item,value\n";
        for (const auto& r : data.ratings.entries()) {
            out << user_id(r.user) << ',' << item_id(r.item) << ',' << format_real(r.value) << '\n';
        }
    }
    if (format == FeatureFormat::binary) {
        for (Index j = 0; j < data.n_items(); ++j) {
            if (item_id(j) != std::to_string(j)) {
                throw SchemaError("binary feature containers require item ids 0..M-1");
            }
        }
        write_features_binary(data.features, dir / DataDirLayout::features_bin);
    } else {
        auto out = open(DataDirLayout::features_csv);
        out << "item";
        for (Index k = 0; k < data.features.dim(); ++k) out << ",f" << k;
        out << '\n';
        for (Index j = 0; j < data.n_items(); ++j) {
            out << item_id(j);
            for (Index k = 0; k < data.features.dim(); ++k) {
                out << ',' << format_real(data.features.X(k, j));
            }
            out << '\n';
        }
    }
    if (data.social) {
        auto out = open(DataDirLayout::social);
        out << "user_a,user_b,similarity\n";
        for (const auto& l : data.social->links()) {
            out << user_id(l.a) << ',' << user_id(l.b) << ',' << format_real(l.similarity) << '\n';
        }
    }
    if (data.groups) {
        auto out = open(DataDirLayout::groups);
        out << "user,group\n";
        for (Index u = 0; u < data.groups->n_users(); ++u) {
            for (Index g : data.groups->groups[static_cast<std::size_t>(u)]) {
                out << user_id(u) << ',' << data.groups->universe[static_cast<std::size_t>(g)] << '\n';
            }
        }
    }
}

} // namespace stm
