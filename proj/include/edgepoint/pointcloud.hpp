#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace edgepoint::data {

/// One labelled cloud. Coordinates are row-major N x 3, float32,
/// centred and rescaled to the unit sphere.
struct PointCloud {
    std::vector<float> points;
    int num_points = 0;
    int label = -1;
    std::uint64_t id = 0;
};

struct DatasetSpec {
    std::vector<std::string> classes;
    int samples_per_class = 250;
    int test_per_class = 50;
    int points_per_cloud = 256;
    double noise_sigma = 0.02;
    std::uint64_t seed = 1;
};

struct Dataset {
    std::vector<PointCloud> train;
    std::vector<PointCloud> test;
    int num_classes = 0;
};

/// Synthetic shape families. A class name is a family ("torus") or a
/// family:variant pair ("torus:2", variants 0..4 select a parameter).
/// Each sample is drawn from the family surface, randomly rotated, scaled
/// anisotropically in [0.7, 1.3] (the plain sphere scales isotropically so
/// it stays a sphere), jittered with Gaussian noise, then normalised.
/// Pure function of the spec: every sample has its own derived RNG stream,
/// and the train/test split ranks per-class sample ids by hash.
Dataset generate_synthetic(const DatasetSpec& spec);

/// All valid family names, in label order for the desk preset.
const std::vector<std::string>& shape_families();

// ---------- meshes ----------

struct Mesh {
    std::vector<double> vertices;             // V x 3
    std::vector<std::array<int, 3>> faces;    // fan-triangulated
    int vertex_count() const { return static_cast<int>(vertices.size() / 3); }
};

/// ASCII OFF: header line, "V F E" counts, V vertex lines, F polygon lines
/// (fan-triangulated). '#' comments and blank lines are skipped. Errors
/// carry the 1-based line number.
Mesh parse_off(const std::string& text);

/// Plain-text points, one "x y z" per line.
std::vector<double> parse_xyz(const std::string& text);

/// n points with probability proportional to triangle area, uniform within
/// each triangle, then normalised to the unit sphere.
PointCloud sample_surface(const Mesh& mesh, int n, std::uint64_t seed);

// ---------- normalisation ----------

/// Subtract the centroid, divide by the max point norm. Throws DomainError
/// when all points coincide.
void normalize_unit_sphere(std::vector<double>& xyz);
void normalize_unit_sphere(std::vector<float>& xyz);

// ---------- dataset cache ----------

// Byte layout (little-endian):
//   "EPDS"  u32 version  u32 sample_count  u32 points_per_cloud
//   f32 coords[count * N * 3]  i32 labels[count]  u64 ids[count]

void save_cache(const std::string& path, const std::vector<PointCloud>& clouds);
std::vector<PointCloud> load_cache(const std::string& path);

}  // namespace edgepoint::data
