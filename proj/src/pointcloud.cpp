#include "edgepoint/pointcloud.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "edgepoint/errors.hpp"
#include "edgepoint/io.hpp"
#include "edgepoint/rng.hpp"

namespace edgepoint::data {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Per-sample RNG stream tags.
constexpr std::uint64_t kTagSample = 1;
constexpr std::uint64_t kTagSplit = 2;

enum class Family { sphere, cube, cylinder, cone, torus, plane, helix, cross };

struct ClassShape {
    Family family;
    int variant;  // 0..4, selects a family parameter
};

const std::vector<std::string> kFamilyNames = {"sphere", "cube",  "cylinder", "cone",
                                               "torus",  "plane", "helix",    "cross"};

ClassShape parse_class_name(const std::string& name) {
    std::string family = name;
    int variant = 0;
    if (const auto colon = name.find(':'); colon != std::string::npos) {
        family = name.substr(0, colon);
        const std::string v = name.substr(colon + 1);
        if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos)
            throw ConfigError("bad class variant in '" + name + "'");
        variant = std::stoi(v);
        if (variant < 0 || variant > 4)
            throw ConfigError("class variant out of range in '" + name + "' (0..4)");
    }
    const auto it = std::find(kFamilyNames.begin(), kFamilyNames.end(), family);
    if (it == kFamilyNames.end()) throw ConfigError("unknown shape class '" + name + "'");
    return {static_cast<Family>(it - kFamilyNames.begin()), variant};
}

// Family parameter tables, one value per variant.
constexpr double kSphereAspect[5] = {1.0, 0.4, 0.6, 1.5, 2.0};
constexpr double kCubeHeight[5] = {1.0, 0.5, 0.25, 1.75, 2.5};
constexpr double kCylinderRadius[5] = {0.6, 0.3, 0.9, 0.45, 0.75};
constexpr double kConeRadius[5] = {0.8, 0.4, 1.2, 0.6, 1.0};
constexpr double kTorusTube[5] = {0.3, 0.15, 0.45, 0.1, 0.22};
constexpr double kPlaneAspect[5] = {1.0, 0.5, 0.25, 2.0, 0.1};
constexpr double kHelixTurns[5] = {2.0, 1.0, 3.0, 4.0, 1.5};
constexpr double kCrossArm[5] = {0.3, 0.15, 0.45, 0.2, 0.1};

using Vec3 = std::array<double, 3>;

Vec3 sample_point(const ClassShape& cls, rng::Xoshiro256& gen) {
    switch (cls.family) {
        case Family::sphere: {
            const double z = gen.uniform(-1.0, 1.0);
            const double phi = gen.uniform(0.0, 2.0 * kPi);
            const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
            return {r * std::cos(phi), r * std::sin(phi), z * kSphereAspect[cls.variant]};
        }
        case Family::cube: {
            const double h = kCubeHeight[cls.variant];
            // Face areas: 4 side faces of 2x2h, top/bottom of 2x2.
            const double side = 4.0 * h, cap = 4.0;
            const double total = 4.0 * side + 2.0 * cap;
            double pick = gen.uniform(0.0, total);
            const double u = gen.uniform(-1.0, 1.0), v = gen.uniform(-1.0, 1.0);
            if (pick < 2.0 * side) return {pick < side ? 1.0 : -1.0, u, v * h};
            pick -= 2.0 * side;
            if (pick < 2.0 * side) return {u, pick < side ? 1.0 : -1.0, v * h};
            pick -= 2.0 * side;
            return {u, v, pick < cap ? h : -h};
        }
        case Family::cylinder: {
            const double r = kCylinderRadius[cls.variant];
            const double side = 2.0 * kPi * r * 2.0, cap = kPi * r * r;
            double pick = gen.uniform(0.0, side + 2.0 * cap);
            if (pick < side) {
                const double theta = gen.uniform(0.0, 2.0 * kPi);
                const double z = gen.uniform(-1.0, 1.0);
                return {r * std::cos(theta), r * std::sin(theta), z};
            }
            const double rr = r * std::sqrt(gen.uniform());
            const double theta = gen.uniform(0.0, 2.0 * kPi);
            return {rr * std::cos(theta), rr * std::sin(theta), pick < side + cap ? 1.0 : -1.0};
        }
        case Family::cone: {
            const double r = kConeRadius[cls.variant];
            const double slant = std::sqrt(r * r + 4.0);
            const double lateral = kPi * r * slant, base = kPi * r * r;
            const double pick = gen.uniform(0.0, lateral + base);
            const double theta = gen.uniform(0.0, 2.0 * kPi);
            if (pick < lateral) {
                const double t = std::sqrt(gen.uniform());  // radius fraction, density ~ t
                return {t * r * std::cos(theta), t * r * std::sin(theta), 1.0 - 2.0 * t};
            }
            const double rr = r * std::sqrt(gen.uniform());
            return {rr * std::cos(theta), rr * std::sin(theta), -1.0};
        }
        case Family::torus: {
            const double major = 0.75, tube = kTorusTube[cls.variant];
            // Tube angle density is proportional to (major + tube*cos t).
            double t = 0.0;
            for (;;) {
                t = gen.uniform(0.0, 2.0 * kPi);
                const double accept = (major + tube * std::cos(t)) / (major + tube);
                if (gen.uniform() <= accept) break;
            }
            const double phi = gen.uniform(0.0, 2.0 * kPi);
            const double ring = major + tube * std::cos(t);
            return {ring * std::cos(phi), ring * std::sin(phi), tube * std::sin(t)};
        }
        case Family::plane: {
            const double a = kPlaneAspect[cls.variant];
            return {gen.uniform(-1.0, 1.0), a * gen.uniform(-1.0, 1.0), 0.0};
        }
        case Family::helix: {
            const double turns = kHelixTurns[cls.variant];
            const double t = gen.uniform();
            const double theta = 2.0 * kPi * turns * t;
            return {std::cos(theta), std::sin(theta), 2.0 * t - 1.0};
        }
        case Family::cross: {
            const double arm = kCrossArm[cls.variant];
            // Two equal-area rectangles crossing at the origin.
            if (gen.uniform() < 0.5)
                return {gen.uniform(-1.0, 1.0), arm * gen.uniform(-1.0, 1.0), 0.0};
            return {arm * gen.uniform(-1.0, 1.0), gen.uniform(-1.0, 1.0), 0.0};
        }
    }
    throw ConfigError("unreachable shape family");
}

/// Uniform rotation from a normalised 4-gaussian quaternion.
std::array<Vec3, 3> random_rotation(rng::Xoshiro256& gen) {
    double q[4];
    double norm = 0.0;
    for (auto& c : q) {
        c = gen.gaussian();
        norm += c * c;
    }
    norm = std::sqrt(norm);
    for (auto& c : q) c /= norm;
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    return {Vec3{1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)},
            Vec3{2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)},
            Vec3{2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)}};
}

PointCloud make_sample(const ClassShape& cls, int label, std::uint64_t id, int n_points,
                       double noise_sigma, std::uint64_t stream_seed) {
    rng::Xoshiro256 gen(stream_seed);
    const auto rot = random_rotation(gen);
    Vec3 axis_scale;
    if (cls.family == Family::sphere && cls.variant == 0) {
        // Anisotropic scaling would turn the sphere into an ellipsoid;
        // this family scales isotropically.
        const double s = gen.uniform(0.7, 1.3);
        axis_scale = {s, s, s};
    } else {
        for (auto& s : axis_scale) s = gen.uniform(0.7, 1.3);
    }

    std::vector<double> pts(static_cast<std::size_t>(n_points) * 3);
    for (int p = 0; p < n_points; ++p) {
        const Vec3 raw = sample_point(cls, gen);
        const Vec3 scaled{raw[0] * axis_scale[0], raw[1] * axis_scale[1], raw[2] * axis_scale[2]};
        for (int d = 0; d < 3; ++d) {
            double v = rot[static_cast<std::size_t>(d)][0] * scaled[0] +
                       rot[static_cast<std::size_t>(d)][1] * scaled[1] +
                       rot[static_cast<std::size_t>(d)][2] * scaled[2];
            if (noise_sigma > 0.0) v += noise_sigma * gen.gaussian();
            pts[static_cast<std::size_t>(p) * 3 + static_cast<std::size_t>(d)] = v;
        }
    }
    normalize_unit_sphere(pts);

    PointCloud cloud;
    cloud.num_points = n_points;
    cloud.label = label;
    cloud.id = id;
    cloud.points.resize(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) cloud.points[i] = static_cast<float>(pts[i]);
    return cloud;
}

}  // namespace

const std::vector<std::string>& shape_families() { return kFamilyNames; }

Dataset generate_synthetic(const DatasetSpec& spec) {
    if (spec.classes.empty()) throw ConfigError("dataset: classes must be non-empty");
    if (spec.points_per_cloud < 4) throw ConfigError("dataset: points_per_cloud must be >= 4");
    if (spec.samples_per_class <= 0) throw ConfigError("dataset: samples_per_class must be > 0");
    if (spec.test_per_class < 0 || spec.test_per_class >= spec.samples_per_class)
        throw ConfigError("dataset: test_per_class must be in [0, samples_per_class)");

    std::vector<ClassShape> shapes;
    shapes.reserve(spec.classes.size());
    for (const auto& name : spec.classes) shapes.push_back(parse_class_name(name));

    Dataset ds;
    ds.num_classes = static_cast<int>(spec.classes.size());
    for (int c = 0; c < ds.num_classes; ++c) {
        // Deterministic split: rank this class's sample indices by hash,
        // the lowest test_per_class hashes become test samples.
        std::vector<std::pair<std::uint64_t, int>> ranked(
            static_cast<std::size_t>(spec.samples_per_class));
        for (int s = 0; s < spec.samples_per_class; ++s)
            ranked[static_cast<std::size_t>(s)] = {
                rng::derive(spec.seed, kTagSplit, static_cast<std::uint64_t>(c),
                            static_cast<std::uint64_t>(s)),
                s};
        std::sort(ranked.begin(), ranked.end());
        std::vector<bool> is_test(static_cast<std::size_t>(spec.samples_per_class), false);
        for (int r = 0; r < spec.test_per_class; ++r)
            is_test[static_cast<std::size_t>(ranked[static_cast<std::size_t>(r)].second)] = true;

        for (int s = 0; s < spec.samples_per_class; ++s) {
            const std::uint64_t id =
                static_cast<std::uint64_t>(c) * static_cast<std::uint64_t>(spec.samples_per_class) +
                static_cast<std::uint64_t>(s);
            const std::uint64_t stream = rng::derive(spec.seed, kTagSample,
                                                     static_cast<std::uint64_t>(c),
                                                     static_cast<std::uint64_t>(s));
            auto cloud = make_sample(shapes[static_cast<std::size_t>(c)], c, id,
                                     spec.points_per_cloud, spec.noise_sigma, stream);
            (is_test[static_cast<std::size_t>(s)] ? ds.test : ds.train).push_back(std::move(cloud));
        }
    }
    return ds;
}

// ---------- normalisation ----------

void normalize_unit_sphere(std::vector<double>& xyz) {
    const std::size_t n = xyz.size() / 3;
    if (n == 0) throw DomainError("normalize: empty cloud");
    double cx = 0, cy = 0, cz = 0;
    for (std::size_t i = 0; i < n; ++i) {
        cx += xyz[i * 3];
        cy += xyz[i * 3 + 1];
        cz += xyz[i * 3 + 2];
    }
    cx /= static_cast<double>(n);
    cy /= static_cast<double>(n);
    cz /= static_cast<double>(n);
    double max_sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        xyz[i * 3] -= cx;
        xyz[i * 3 + 1] -= cy;
        xyz[i * 3 + 2] -= cz;
        const double sq = xyz[i * 3] * xyz[i * 3] + xyz[i * 3 + 1] * xyz[i * 3 + 1] +
                          xyz[i * 3 + 2] * xyz[i * 3 + 2];
        max_sq = std::max(max_sq, sq);
    }
    if (max_sq <= 0.0) throw DomainError("normalize: zero spread (all points identical)");
    const double inv = 1.0 / std::sqrt(max_sq);
    for (auto& v : xyz) v *= inv;
}

void normalize_unit_sphere(std::vector<float>& xyz) {
    std::vector<double> tmp(xyz.begin(), xyz.end());
    normalize_unit_sphere(tmp);
    for (std::size_t i = 0; i < xyz.size(); ++i) xyz[i] = static_cast<float>(tmp[i]);
}

// ---------- OFF / XYZ parsing ----------

namespace {

struct LineReader {
    std::istringstream stream;
    int line_no = 0;
    explicit LineReader(const std::string& text) : stream(text) {}

    /// Next significant line (skips blanks and '#' comments). Returns false at EOF.
    bool next(std::string& out) {
        std::string raw;
        while (std::getline(stream, raw)) {
            ++line_no;
            if (!raw.empty() && raw.back() == '\r') raw.pop_back();
            const auto first = raw.find_first_not_of(" \t");
            if (first == std::string::npos) continue;
            if (raw[first] == '#') continue;
            out = raw;
            return true;
        }
        ++line_no;
        return false;
    }
};

}  // namespace

Mesh parse_off(const std::string& text) {
    LineReader reader(text);
    std::string line;
    if (!reader.next(line)) throw ParseError(reader.line_no, "empty file, expected OFF header");
    {
        std::istringstream hs(line);
        std::string token;
        hs >> token;
        if (token != "OFF") throw ParseError(reader.line_no, "expected OFF header");
        std::string extra;
        if (hs >> extra) throw ParseError(reader.line_no, "unexpected tokens after OFF header");
    }

    if (!reader.next(line)) throw ParseError(reader.line_no, "missing counts line");
    long long v_count = 0, f_count = 0, e_count = 0;
    {
        std::istringstream cs(line);
        if (!(cs >> v_count >> f_count >> e_count) || v_count < 0 || f_count < 0)
            throw ParseError(reader.line_no, "counts line must be 'V F E'");
    }

    Mesh mesh;
    mesh.vertices.reserve(static_cast<std::size_t>(v_count) * 3);
    for (long long i = 0; i < v_count; ++i) {
        if (!reader.next(line))
            throw ParseError(reader.line_no, "truncated file: expected vertex " + std::to_string(i));
        std::istringstream vs(line);
        double x, y, z;
        if (!(vs >> x >> y >> z))
            throw ParseError(reader.line_no, "vertex line needs 3 coordinates");
        mesh.vertices.insert(mesh.vertices.end(), {x, y, z});
    }

    for (long long i = 0; i < f_count; ++i) {
        if (!reader.next(line))
            throw ParseError(reader.line_no, "truncated file: expected face " + std::to_string(i));
        std::istringstream fs(line);
        long long m = 0;
        if (!(fs >> m) || m < 3)
            throw ParseError(reader.line_no, "face must start with a vertex count >= 3");
        std::vector<int> idx(static_cast<std::size_t>(m));
        for (auto& ix : idx) {
            long long raw = -1;
            if (!(fs >> raw)) throw ParseError(reader.line_no, "face has fewer indices than stated");
            if (raw < 0 || raw >= v_count)
                throw ParseError(reader.line_no, "vertex index " + std::to_string(raw) +
                                                     " out of range [0, " + std::to_string(v_count) + ")");
            ix = static_cast<int>(raw);
        }
        for (std::size_t t = 1; t + 1 < idx.size(); ++t)
            mesh.faces.push_back({idx[0], idx[t], idx[t + 1]});
    }
    return mesh;
}

std::vector<double> parse_xyz(const std::string& text) {
    LineReader reader(text);
    std::string line;
    std::vector<double> pts;
    while (reader.next(line)) {
        std::istringstream ls(line);
        double x, y, z;
        if (!(ls >> x >> y >> z)) throw ParseError(reader.line_no, "expected 'x y z'");
        pts.insert(pts.end(), {x, y, z});
    }
    return pts;
}

// ---------- surface sampling ----------

PointCloud sample_surface(const Mesh& mesh, int n, std::uint64_t seed) {
    if (n < 1) throw ConfigError("sample_surface: n must be >= 1");
    std::vector<double> cumulative(mesh.faces.size());
    double total = 0.0;
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        const auto& face = mesh.faces[f];
        const double* a = &mesh.vertices[static_cast<std::size_t>(face[0]) * 3];
        const double* b = &mesh.vertices[static_cast<std::size_t>(face[1]) * 3];
        const double* c = &mesh.vertices[static_cast<std::size_t>(face[2]) * 3];
        const double ux = b[0] - a[0], uy = b[1] - a[1], uz = b[2] - a[2];
        const double vx = c[0] - a[0], vy = c[1] - a[1], vz = c[2] - a[2];
        const double cx = uy * vz - uz * vy, cy = uz * vx - ux * vz, cz = ux * vy - uy * vx;
        total += 0.5 * std::sqrt(cx * cx + cy * cy + cz * cz);
        cumulative[f] = total;
    }
    if (!(total > 0.0)) throw DomainError("sample_surface: mesh has no nondegenerate triangle");

    rng::Xoshiro256 gen(seed);
    std::vector<double> pts(static_cast<std::size_t>(n) * 3);
    for (int p = 0; p < n; ++p) {
        const double pick = gen.uniform(0.0, total);
        const auto it = std::lower_bound(cumulative.begin(), cumulative.end(), pick);
        const std::size_t f = std::min(static_cast<std::size_t>(it - cumulative.begin()),
                                       mesh.faces.size() - 1);
        const auto& face = mesh.faces[f];
        const double* a = &mesh.vertices[static_cast<std::size_t>(face[0]) * 3];
        const double* b = &mesh.vertices[static_cast<std::size_t>(face[1]) * 3];
        const double* c = &mesh.vertices[static_cast<std::size_t>(face[2]) * 3];
        double u = gen.uniform(), v = gen.uniform();
        if (u + v > 1.0) {
            u = 1.0 - u;
            v = 1.0 - v;
        }
        for (int d = 0; d < 3; ++d)
            pts[static_cast<std::size_t>(p) * 3 + static_cast<std::size_t>(d)] =
                a[d] + u * (b[d] - a[d]) + v * (c[d] - a[d]);
    }
    normalize_unit_sphere(pts);

    PointCloud cloud;
    cloud.num_points = n;
    cloud.points.resize(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) cloud.points[i] = static_cast<float>(pts[i]);
    return cloud;
}

// ---------- dataset cache ----------

namespace {
constexpr char kCacheMagic[5] = "EPDS";
constexpr std::uint32_t kCacheVersion = 1;
}  // namespace

void save_cache(const std::string& path, const std::vector<PointCloud>& clouds) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw ArtifactError("cannot open dataset cache for writing: " + path);
    const int n = clouds.empty() ? 0 : clouds.front().num_points;
    for (const auto& c : clouds)
        if (c.num_points != n) throw DimensionError("cache requires a uniform point count");
    io::put_magic(os, kCacheMagic);
    io::put_u32(os, kCacheVersion);
    io::put_u32(os, static_cast<std::uint32_t>(clouds.size()));
    io::put_u32(os, static_cast<std::uint32_t>(n));
    for (const auto& c : clouds)
        for (float v : c.points) io::put_f32(os, v);
    for (const auto& c : clouds) io::put_i32(os, c.label);
    for (const auto& c : clouds) io::put_u64(os, c.id);
    if (!os) throw ArtifactError("write failed: " + path);
}

std::vector<PointCloud> load_cache(const std::string& path) {
    if (!std::filesystem::exists(path)) throw ArtifactError("dataset cache not found: " + path);
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ArtifactError("cannot open dataset cache: " + path);
    io::expect_magic(is, kCacheMagic, "dataset cache");
    if (io::get_u32(is) != kCacheVersion) throw DomainError("unsupported dataset cache version");
    const std::uint32_t count = io::get_u32(is);
    const std::uint32_t n = io::get_u32(is);
    std::vector<PointCloud> clouds(count);
    for (auto& c : clouds) {
        c.num_points = static_cast<int>(n);
        c.points.resize(static_cast<std::size_t>(n) * 3);
        for (auto& v : c.points) v = io::get_f32(is);
    }
    for (auto& c : clouds) c.label = io::get_i32(is);
    for (auto& c : clouds) c.id = io::get_u64(is);
    return clouds;
}

}  // namespace edgepoint::data
