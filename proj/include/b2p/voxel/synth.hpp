#pragma once

#include <cstdint>
#include <string>

#include "b2p/voxel/point_cloud.hpp"

namespace b2p::voxel {

// Deterministic textured test clouds. All shapes are one-voxel-thick
// shells so that their point counts have closed forms.
struct SynthParams {
  int bit_depth = 6;
  double radius = 0.0;  // sphere radius / half cube edge in voxels; 0 = auto
  int checker = 8;      // checker squares around the equator (sphere)
  uint64_t seed = 0;
};

// Voxels whose center lies within 0.5 of a sphere surface, colored by a
// longitude/latitude checkerboard. Expected count ~ 4*pi*r^2.
PointCloud synth_sphere(const SynthParams& p);

// Boundary voxels of a solid cube of edge a, colored by a position gradient.
// Exact count a^3 - (a-2)^3.
PointCloud synth_cube(const SynthParams& p);

// Sphere and cube side by side (overlaps merged).
PointCloud synth_union(const SynthParams& p);

PointCloud synth(const std::string& kind, const SynthParams& p);

// Analytic point-count target of a generated shape.
double synth_sphere_target(double radius);
int64_t synth_cube_count(int edge);

// Radius/edge actually used for `p` (resolves the auto default).
double synth_sphere_radius(const SynthParams& p);
int synth_cube_edge(const SynthParams& p);

}  // namespace b2p::voxel
