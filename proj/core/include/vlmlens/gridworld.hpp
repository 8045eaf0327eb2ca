#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vlmlens/array.hpp"

namespace vlmlens {

// Inclusive cell-coordinate box; x is the column, y is the row.
struct Box {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  int width() const { return x1 - x0 + 1; }
  int height() const { return y1 - y0 + 1; }
  int area() const { return width() * height(); }
  bool contains(int x, int y) const { return x >= x0 && x <= x1 && y >= y0 && y <= y1; }

  bool operator==(const Box&) const = default;
};

bool boxes_overlap(const Box& a, const Box& b);

struct PlacedObject {
  int class_id = 0;
  Box box;

  bool operator==(const PlacedObject&) const = default;
};

// A scene is pure layout plus the background phase seed; pixel content only
// exists after render_scene. noise_sigma rides along so a scene file is
// self-describing.
struct Scene {
  int grid = 8;
  int num_classes = 10;
  int d_vis = 32;
  double noise_sigma = 0.02;
  std::uint64_t bg_seed = 0;
  std::vector<PlacedObject> objects;

  bool operator==(const Scene&) const = default;
};

struct SceneConfig {
  int grid = 8;
  int num_classes = 10;
  int d_vis = 32;
  double noise_sigma = 0.02;
  int area_min = 1;
  int area_max = 38;
};

struct GenConfig {
  SceneConfig scene;
  int num_objects = 1;
  int side_min = 2;
  int side_max = 4;
  int max_attempts = 1000;
};

// Throws on overlap, out-of-bounds boxes, duplicate classes, bad ids, or
// area outside [area_min, area_max].
void validate_scene(const Scene& scene, int area_min, int area_max);

// Rejection-samples non-overlapping axis-aligned rectangles with distinct
// classes. Throws ErrorKind::generation when constraints cannot be met
// (more objects than classes, side range outside the area filter, no room).
Scene generate_scene(const GenConfig& config, std::uint64_t seed);

// Renders to a (grid*grid, d_vis) array, row-major by cell index y*grid + x.
// Object cells carry the class signature (standard basis e_class); background
// cells carry a unit vector on the circle spanned by e_{C} and e_{C+1} with a
// per-cell phase drawn from bg_seed. Every cell then adds isotropic
// N(0, noise_sigma^2) noise drawn from render_seed. Both streams are
// counter-based per (seed, cell), so two scenes sharing layout outside a
// region render bit-identically outside that region.
DenseArray render_scene(const Scene& scene, std::uint64_t render_seed);

// Cell indices covered by an object of the given class (exactly one per scene).
std::vector<int> object_cells(const Scene& scene, int class_id);

// Source scene plus the same scene with the target object deleted. Contexts
// are bit-identical by construction; the constructor proves it by rendering.
struct ControlPair {
  Scene source;
  Scene base;
  int target_class = 0;

  bool operator==(const ControlPair&) const = default;
};

// Throws ErrorKind::lookup if target_class is absent, ErrorKind::construction
// if the rendered diff between source and base is not exactly the object's
// cells at render_seed.
ControlPair make_control_pair(const Scene& scene, int target_class,
                              std::uint64_t render_seed);

// ---- 8-connected morphology on grid masks -----------------------------------
// Masks are grid*grid bytes, nonzero = foreground, indexed y*grid + x.

using Mask = std::vector<std::uint8_t>;

Mask box_to_mask(const Box& box, int grid);

// 3x3 structuring element. Out-of-grid counts as background, so erosion
// removes every border cell and a 2x2 block erodes to nothing.
Mask dilate8(const Mask& mask, int grid);
Mask erode8(const Mask& mask, int grid);

// Tight bounding box of a nonempty mask; throws ErrorKind::empty_support.
Box mask_bounding_box(const Mask& mask, int grid);

// ---- serialization ----------------------------------------------------------
// One JSON object per line; stable key order so reruns are byte-identical.

std::string scene_to_json_line(const Scene& scene);
Scene scene_from_json_line(const std::string& line);

std::string pair_to_json_line(const ControlPair& pair);
ControlPair pair_from_json_line(const std::string& line);

void write_scenes_jsonl(const std::string& path, const std::vector<Scene>& scenes);
std::vector<Scene> read_scenes_jsonl(const std::string& path);

void write_pairs_jsonl(const std::string& path, const std::vector<ControlPair>& pairs);
std::vector<ControlPair> read_pairs_jsonl(const std::string& path);

}  // namespace vlmlens
