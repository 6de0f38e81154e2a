#include "scsm/data.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <random>

namespace scsm::data {

// ---------------------------------------------------------------------------
// Scene generator
// ---------------------------------------------------------------------------

namespace {

struct Rgb {
    double r, g, b;
};

void paint(Tensor& img, int r, int c, const Rgb& col) {
    img.at(0, r, c) = std::clamp(col.r, 0.0, 1.0);
    img.at(1, r, c) = std::clamp(col.g, 0.0, 1.0);
    img.at(2, r, c) = std::clamp(col.b, 0.0, 1.0);
}

}  // namespace

SceneSample generate_scene(std::uint64_t seed, SceneMode mode, int height, int width) {
    if (height < 32 || width < 32)
        throw ConfigError("generate_scene: extents must be >= 32, got " +
                          std::to_string(height) + "x" + std::to_string(width));
    std::mt19937_64 rng(seed * 2654435761ULL + (mode == SceneMode::Urban ? 1 : 0));
    auto uni = [&](double lo, double hi) {
        return lo + (hi - lo) * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
    };
    auto uni_int = [&](int lo, int hi) {  // inclusive
        return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
    };

    SceneSample s;
    s.mode = mode;
    s.image = Tensor({3, height, width});
    s.mask.height = height;
    s.mask.width = width;
    s.mask.idx.assign(static_cast<std::size_t>(height) * width, kBackground);
    auto cls = [&](int r, int c) -> int& {
        return s.mask.idx[static_cast<std::size_t>(r) * width + c];
    };

    // Layout lives on an 8-pixel cell grid so region edges are coarse enough
    // for the decoder to resolve; the class signal is carried by color plus
    // heavy per-pixel noise, not by fine geometry.
    constexpr int kCell = 8;
    const int gh = height / kCell, gw = width / kCell;

    // Background: rural field texture vs urban pavement-grey, both with
    // strong per-pixel variation so raw color alone does not separate classes.
    for (int r = 0; r < height; ++r)
        for (int c = 0; c < width; ++c) {
            double n = uni(-0.2, 0.2);
            Rgb col = mode == SceneMode::Rural
                          ? Rgb{0.25 + n, 0.52 + uni(-0.25, 0.25), 0.2 + n}
                          : Rgb{0.55 + n, 0.55 + n, 0.52 + uni(-0.15, 0.15)};
            paint(s.image, r, c, col);
        }

    // Roads: cell-aligned strips four cells wide (two-cell cars keep a full
    // cell of road on every side). Always one horizontal road; sometimes a
    // crossing vertical one.
    const int road_cells_w = 4;
    const int hr0 = uni_int(1, std::max(1, gh - road_cells_w - 1));  // cell row
    const bool crossing = uni(0.0, 1.0) < 0.5;
    const int vc0 = crossing ? uni_int(1, std::max(1, gw - road_cells_w - 1)) : -1;
    auto in_road = [&](int r, int c) {
        const int cr = r / kCell, cc = c / kCell;
        if (cr >= hr0 && cr < hr0 + road_cells_w) return true;
        return crossing && cc >= vc0 && cc < vc0 + road_cells_w;
    };
    for (int r = 0; r < height; ++r)
        for (int c = 0; c < width; ++c)
            if (in_road(r, c)) {
                cls(r, c) = kRoad;
                double n = uni(-0.16, 0.16);
                paint(s.image, r, c, {0.3 + n, 0.3 + n, 0.33 + n});
            }

    auto paint_cell_rect = [&](int cr, int cc, int hcells, int wcells, int label,
                               const Rgb& base, double noise) {
        for (int r = cr * kCell; r < (cr + hcells) * kCell; ++r)
            for (int c = cc * kCell; c < (cc + wcells) * kCell; ++c) {
                if (label >= 0) cls(r, c) = label;
                double n = uni(-noise, noise);
                paint(s.image, r, c, {base.r + n, base.g + n, base.b + n});
            }
    };
    auto cells_are = [&](int cr, int cc, int hcells, int wcells, int label) {
        if (cr < 0 || cc < 0 || cr + hcells > gh || cc + wcells > gw) return false;
        for (int r = cr * kCell; r < (cr + hcells) * kCell; ++r)
            for (int c = cc * kCell; c < (cc + wcells) * kCell; ++c)
                if (cls(r, c) != label) return false;
        return true;
    };

    // Buildings hug the roads in urban mode (a clear cell above, flush kerb
    // below); rural scenes keep fields. Per-building tone varies widely.
    if (mode == SceneMode::Urban) {
        const int n_buildings = uni_int(3, 5);
        for (int b = 0; b < n_buildings; ++b) {
            const bool above = uni(0.0, 1.0) < 0.5;
            const int cr = above ? hr0 - 3 : hr0 + road_cells_w;
            const int cc = uni_int(0, std::max(0, gw - 2));
            if (!cells_are(cr, cc, 2, 2, kBackground)) continue;
            Rgb base{uni(0.55, 0.85), uni(0.15, 0.35), uni(0.08, 0.28)};
            paint_cell_rect(cr, cc, 2, 2, kBuilding, base, 0.14);
        }
    }

    // Cars are two-cell blocks in the middle road lanes, never at the image
    // border, so every car pixel is ringed by road (or another car).
    const Rgb car_palette[4] = {{0.15, 0.8, 0.85}, {0.15, 0.3, 0.9},
                                {0.95, 0.85, 0.2}, {0.88, 0.9, 0.92}};
    const int fleet = uni_int(0, 3);  // one fleet color per scene
    const Rgb scene_car = car_palette[fleet];
    const int decoy = (fleet + uni_int(1, 3)) % 4;  // the off-fleet paint job
    const int n_cars = 2;
    for (int i = 0; i < n_cars; ++i) {
        const int cc = uni_int(1, std::max(1, gw - 3));
        if (!cells_are(hr0 + 1, cc, 2, 2, kRoad)) continue;
        paint_cell_rect(hr0 + 1, cc, 2, 2, kCar, scene_car, 0.1);
    }
    if (crossing) {
        const int n_vcars = uni_int(1, 2);
        for (int i = 0; i < n_vcars; ++i) {
            const int cr = uni_int(1, std::max(1, gh - 3));
            if (!cells_are(cr, vc0 + 1, 2, 2, kRoad)) continue;
            paint_cell_rect(cr, vc0 + 1, 2, 2, kCar, scene_car, 0.1);
        }
    }

    // Distractors: car-colored patches off the road, labeled background.
    // Only the road context separates these from real cars.
    const int n_distractors = uni_int(1, 2);
    for (int i = 0; i < n_distractors; ++i) {
        const int cr = uni_int(0, std::max(0, gh - 2));
        const int cc = uni_int(0, std::max(0, gw - 2));
        if (!cells_are(cr, cc, 2, 2, kBackground)) continue;
        paint_cell_rect(cr, cc, 2, 2, -1, car_palette[uni_int(0, 3)], 0.14);
    }

    // Road decoys: parked crates in the middle lane, painted in a car-palette
    // color that is never the fleet color. They keep the road label, so a
    // car-vs-decoy call needs the scene-wide fleet color, not local texture.
    // Demand a clear road cell on every side of the decoy: no car is ever
    // close enough for block-local texture to give it away, so separating a
    // decoy from an isolated real car takes the scene-wide fleet color.
    const int n_decoys = 2;
    int placed = 0;
    for (int i = 0; i < 12 && placed < n_decoys; ++i) {
        const bool vertical = crossing && uni(0.0, 1.0) < 0.6;
        if (vertical) {
            const int rr = uni_int(1, std::max(1, gh - 3));
            if (!cells_are(rr - 1, vc0, 4, road_cells_w, kRoad)) continue;
            paint_cell_rect(rr, vc0 + 1, 2, 2, -1, car_palette[decoy], 0.1);
        } else {
            const int cc = uni_int(1, std::max(1, gw - 3));
            if (!cells_are(hr0, cc - 1, road_cells_w, 4, kRoad)) continue;
            paint_cell_rect(hr0 + 1, cc, 2, 2, -1, car_palette[decoy], 0.1);
        }
        ++placed;
    }
    return s;
}

std::vector<SceneSample> generate_dataset(std::uint64_t seed, int count, int height, int width) {
    std::vector<SceneSample> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i)
        out.push_back(generate_scene(seed + static_cast<std::uint64_t>(i) * 1000003ULL,
                                     i % 2 == 0 ? SceneMode::Rural : SceneMode::Urban, height,
                                     width));
    return out;
}

// ---------------------------------------------------------------------------
// Tensor file format
// ---------------------------------------------------------------------------

namespace {

constexpr char kTensorMagic[4] = {'S', 'C', 'T', '1'};
constexpr char kCheckpointMagic[4] = {'S', 'C', 'K', '1'};

void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is, const std::string& what) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4))
        throw FormatError("truncated " + what + " at byte " + std::to_string(is.tellg()));
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_tensor_stream(std::ostream& os, const Tensor& t) {
    os.write(kTensorMagic, 4);
    const unsigned char rank = static_cast<unsigned char>(t.rank());
    os.write(reinterpret_cast<const char*>(&rank), 1);
    for (int e : t.shape()) put_u32(os, static_cast<std::uint32_t>(e));
    for (std::int64_t i = 0; i < t.size(); ++i) {
        double v = t[i];
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        unsigned char b[8];
        for (int k = 0; k < 8; ++k) b[k] = static_cast<unsigned char>(bits >> (8 * k));
        os.write(reinterpret_cast<const char*>(b), 8);
    }
}

Tensor read_tensor_stream(std::istream& is) {
    char magic[4];
    if (!is.read(magic, 4)) throw FormatError("truncated tensor file at byte 0");
    if (std::memcmp(magic, kTensorMagic, 4) != 0)
        throw FormatError("bad tensor magic at byte 0 (expected SCT1)");
    unsigned char rank;
    if (!is.read(reinterpret_cast<char*>(&rank), 1))
        throw FormatError("truncated tensor file at byte 4");
    std::vector<int> shape(rank);
    for (int i = 0; i < rank; ++i) {
        std::uint32_t e = get_u32(is, "tensor extent");
        if (e == 0 || e > (1u << 30)) throw FormatError("invalid tensor extent");
        shape[i] = static_cast<int>(e);
    }
    const std::int64_t n = Tensor::shape_size(shape);
    Tensor t(shape);
    for (std::int64_t i = 0; i < n; ++i) {
        unsigned char b[8];
        if (!is.read(reinterpret_cast<char*>(b), 8))
            throw FormatError("truncated tensor payload at byte " + std::to_string(is.tellg()));
        std::uint64_t bits = 0;
        for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(b[k]) << (8 * k);
        std::memcpy(&t[i], &bits, 8);
    }
    return t;
}

}  // namespace

void write_tensor(const std::string& path, const Tensor& t) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot open " + path + " for writing");
    write_tensor_stream(os, t);
    if (!os) throw FormatError("write failure on " + path);
}

Tensor read_tensor(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot open " + path);
    return read_tensor_stream(is);
}

// ---------------------------------------------------------------------------
// PGM masks
// ---------------------------------------------------------------------------

void write_mask(const std::string& path, const smg::ArgmaxMask& mask) {
    for (int v : mask.idx)
        if (v < 0 || v > 255)
            throw FormatError("write_mask: class index " + std::to_string(v) +
                              " exceeds one byte");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot open " + path + " for writing");
    os << "P5\n" << mask.width << " " << mask.height << "\n255\n";
    for (int v : mask.idx) {
        const unsigned char b = static_cast<unsigned char>(v);
        os.write(reinterpret_cast<const char*>(&b), 1);
    }
    if (!os) throw FormatError("write failure on " + path);
}

smg::ArgmaxMask read_mask(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot open " + path);
    std::string magic;
    is >> magic;
    if (magic != "P5") throw FormatError(path + ": malformed PGM header (expected P5)");
    int w = 0, h = 0, maxval = 0;
    if (!(is >> w >> h >> maxval) || w <= 0 || h <= 0 || maxval != 255)
        throw FormatError(path + ": malformed PGM header fields");
    is.get();  // single whitespace after maxval
    smg::ArgmaxMask m;
    m.width = w;
    m.height = h;
    m.idx.resize(static_cast<std::size_t>(w) * h);
    for (auto& v : m.idx) {
        unsigned char b;
        if (!is.read(reinterpret_cast<char*>(&b), 1))
            throw FormatError(path + ": truncated PGM payload at byte " +
                              std::to_string(is.tellg()));
        v = b;
    }
    return m;
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

std::uint32_t fnv1a(const std::string& text) {
    std::uint32_t h = 2166136261u;
    for (unsigned char c : text) {
        h ^= c;
        h *= 16777619u;
    }
    return h;
}

void write_checkpoint(const std::string& path, std::uint32_t config_digest,
                      const std::map<std::string, Tensor>& tensors) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot open " + path + " for writing");
    os.write(kCheckpointMagic, 4);
    put_u32(os, config_digest);
    put_u32(os, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [name, t] : tensors) {
        if (name.size() > 0xFFFF) throw FormatError("checkpoint key too long: " + name);
        const std::uint16_t len = static_cast<std::uint16_t>(name.size());
        const unsigned char lb[2] = {static_cast<unsigned char>(len),
                                     static_cast<unsigned char>(len >> 8)};
        os.write(reinterpret_cast<const char*>(lb), 2);
        os.write(name.data(), len);
        write_tensor_stream(os, t);
    }
    if (!os) throw FormatError("write failure on " + path);
}

std::map<std::string, Tensor> read_checkpoint(const std::string& path,
                                              std::uint32_t* config_digest) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot open " + path);
    char magic[4];
    if (!is.read(magic, 4)) throw FormatError(path + ": truncated checkpoint at byte 0");
    if (std::memcmp(magic, kCheckpointMagic, 4) != 0)
        throw FormatError(path + ": bad checkpoint magic at byte 0 (expected SCK1)");
    const std::uint32_t digest = get_u32(is, "checkpoint digest");
    if (config_digest) *config_digest = digest;
    const std::uint32_t count = get_u32(is, "checkpoint entry count");
    std::map<std::string, Tensor> out;
    for (std::uint32_t i = 0; i < count; ++i) {
        unsigned char lb[2];
        if (!is.read(reinterpret_cast<char*>(lb), 2))
            throw FormatError(path + ": truncated checkpoint key at byte " +
                              std::to_string(is.tellg()));
        const std::size_t len = lb[0] | (static_cast<std::size_t>(lb[1]) << 8);
        std::string name(len, '\0');
        if (!is.read(name.data(), static_cast<std::streamsize>(len)))
            throw FormatError(path + ": truncated checkpoint key at byte " +
                              std::to_string(is.tellg()));
        out.emplace(std::move(name), read_tensor_stream(is));
    }
    return out;
}

}  // namespace scsm::data
