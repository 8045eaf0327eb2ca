#include "vlmlens/gridworld.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "vlmlens/rng.hpp"

namespace vlmlens {

namespace {

using ordered_json = nlohmann::ordered_json;

// Stream labels for derive_seed; frozen so rendered corpora stay reproducible.
constexpr std::uint64_t kLabelBgAngle = 0x6267616eULL;
constexpr std::uint64_t kLabelNoise = 0x6e6f6973ULL;
constexpr std::uint64_t kLabelGen = 0x67656e65ULL;
constexpr std::uint64_t kLabelBgSeed = 0x62677364ULL;

constexpr double kTau = 6.283185307179586477;

}  // namespace

bool boxes_overlap(const Box& a, const Box& b) {
  return a.x0 <= b.x1 && b.x0 <= a.x1 && a.y0 <= b.y1 && b.y0 <= a.y1;
}

void validate_scene(const Scene& scene, int area_min, int area_max) {
  require(scene.grid > 0, ErrorKind::contract, "scene grid must be positive");
  require(scene.d_vis >= scene.num_classes + 2, ErrorKind::contract,
          "d_vis must fit class signatures plus the background plane");
  std::vector<bool> class_seen(static_cast<std::size_t>(scene.num_classes), false);
  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    const PlacedObject& obj = scene.objects[i];
    require(obj.class_id >= 0 && obj.class_id < scene.num_classes, ErrorKind::contract,
            "object class out of range: " + std::to_string(obj.class_id));
    require(!class_seen[static_cast<std::size_t>(obj.class_id)], ErrorKind::contract,
            "duplicate object class " + std::to_string(obj.class_id));
    class_seen[static_cast<std::size_t>(obj.class_id)] = true;
    const Box& b = obj.box;
    require(b.x0 <= b.x1 && b.y0 <= b.y1, ErrorKind::contract, "degenerate box");
    require(b.x0 >= 0 && b.y0 >= 0 && b.x1 < scene.grid && b.y1 < scene.grid,
            ErrorKind::contract, "box out of grid bounds");
    require(b.area() >= area_min && b.area() <= area_max, ErrorKind::contract,
            "object area " + std::to_string(b.area()) + " outside [" +
                std::to_string(area_min) + "," + std::to_string(area_max) + "]");
    for (std::size_t j = 0; j < i; ++j) {
      require(!boxes_overlap(scene.objects[j].box, b), ErrorKind::contract,
              "objects overlap");
    }
  }
}

Scene generate_scene(const GenConfig& config, std::uint64_t seed) {
  const SceneConfig& sc = config.scene;
  require(config.num_objects >= 1, ErrorKind::generation, "need at least one object");
  require(config.num_objects <= sc.num_classes, ErrorKind::generation,
          "cannot place " + std::to_string(config.num_objects) +
              " objects with distinct classes from " + std::to_string(sc.num_classes));
  require(config.side_min >= 1 && config.side_max >= config.side_min &&
              config.side_max <= sc.grid,
          ErrorKind::generation, "side range incompatible with grid");
  require(config.side_min * config.side_min <= sc.area_max &&
              config.side_max * config.side_max >= sc.area_min,
          ErrorKind::generation, "side range has no area inside the filter");

  Rng rng(derive_seed(seed, {kLabelGen}));

  std::vector<int> classes(static_cast<std::size_t>(sc.num_classes));
  for (int c = 0; c < sc.num_classes; ++c) classes[static_cast<std::size_t>(c)] = c;
  rng.shuffle(classes);

  Scene scene;
  scene.grid = sc.grid;
  scene.num_classes = sc.num_classes;
  scene.d_vis = sc.d_vis;
  scene.noise_sigma = sc.noise_sigma;
  scene.bg_seed = derive_seed(seed, {kLabelBgSeed});

  int side_span = config.side_max - config.side_min + 1;
  for (int k = 0; k < config.num_objects; ++k) {
    bool placed = false;
    for (int attempt = 0; attempt < config.max_attempts && !placed; ++attempt) {
      int w = config.side_min + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(side_span)));
      int h = config.side_min + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(side_span)));
      int area = w * h;
      if (area < sc.area_min || area > sc.area_max) continue;
      int x0 = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(sc.grid - w + 1)));
      int y0 = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(sc.grid - h + 1)));
      Box box{x0, y0, x0 + w - 1, y0 + h - 1};
      bool clash = false;
      for (const PlacedObject& other : scene.objects)
        if (boxes_overlap(other.box, box)) clash = true;
      if (clash) continue;
      scene.objects.push_back(PlacedObject{classes[static_cast<std::size_t>(k)], box});
      placed = true;
    }
    require(placed, ErrorKind::generation,
            "could not place object " + std::to_string(k) + " after " +
                std::to_string(config.max_attempts) + " attempts");
  }

  validate_scene(scene, sc.area_min, sc.area_max);
  return scene;
}

DenseArray render_scene(const Scene& scene, std::uint64_t render_seed) {
  int g = scene.grid;
  std::size_t cells = static_cast<std::size_t>(g) * static_cast<std::size_t>(g);
  std::size_t d = static_cast<std::size_t>(scene.d_vis);
  DenseArray out({cells, d});

  // Cell -> owning class, -1 for background. Scenes are validated non-overlapping.
  std::vector<int> owner(cells, -1);
  for (const PlacedObject& obj : scene.objects)
    for (int y = obj.box.y0; y <= obj.box.y1; ++y)
      for (int x = obj.box.x0; x <= obj.box.x1; ++x)
        owner[static_cast<std::size_t>(y * g + x)] = obj.class_id;

  for (std::size_t cell = 0; cell < cells; ++cell) {
    double* row = out.data() + cell * d;
    int cls = owner[cell];
    if (cls >= 0) {
      row[static_cast<std::size_t>(cls)] = 1.0;
    } else {
      // Unit vector on the background plane; phase is a pure function of
      // (bg_seed, cell) so layouts agreeing at this cell agree bit-for-bit.
      Rng bg(derive_seed(scene.bg_seed, {kLabelBgAngle, cell}));
      double angle = kTau * bg.uniform();
      row[static_cast<std::size_t>(scene.num_classes)] = std::cos(angle);
      row[static_cast<std::size_t>(scene.num_classes) + 1] = std::sin(angle);
    }
    Rng noise(derive_seed(render_seed, {kLabelNoise, cell}));
    for (std::size_t j = 0; j < d; ++j) row[j] += scene.noise_sigma * noise.normal();
  }
  return out;
}

std::vector<int> object_cells(const Scene& scene, int class_id) {
  for (const PlacedObject& obj : scene.objects) {
    if (obj.class_id != class_id) continue;
    std::vector<int> cells;
    for (int y = obj.box.y0; y <= obj.box.y1; ++y)
      for (int x = obj.box.x0; x <= obj.box.x1; ++x) cells.push_back(y * scene.grid + x);
    return cells;
  }
  fail(ErrorKind::lookup, "no object of class " + std::to_string(class_id) + " in scene");
}

ControlPair make_control_pair(const Scene& scene, int target_class,
                              std::uint64_t render_seed) {
  std::vector<int> target = object_cells(scene, target_class);

  ControlPair pair;
  pair.source = scene;
  pair.base = scene;
  pair.target_class = target_class;
  auto& objs = pair.base.objects;
  for (std::size_t i = 0; i < objs.size(); ++i) {
    if (objs[i].class_id == target_class) {
      objs.erase(objs.begin() + static_cast<std::ptrdiff_t>(i));
      break;
    }
  }

  // Prove context bit-identity: the rendered diff must be exactly the target cells.
  DenseArray src = render_scene(pair.source, render_seed);
  DenseArray base = render_scene(pair.base, render_seed);
  std::vector<bool> expected(src.rows(), false);
  for (int c : target) expected[static_cast<std::size_t>(c)] = true;
  std::size_t d = src.cols();
  for (std::size_t cell = 0; cell < src.rows(); ++cell) {
    bool differs = false;
    for (std::size_t j = 0; j < d; ++j)
      if (src[cell * d + j] != base[cell * d + j]) differs = true;
    require(differs == expected[cell], ErrorKind::construction,
            "control pair diff leaks outside the target object at cell " +
                std::to_string(cell));
  }
  return pair;
}

Mask box_to_mask(const Box& box, int grid) {
  Mask mask(static_cast<std::size_t>(grid) * static_cast<std::size_t>(grid), 0);
  for (int y = box.y0; y <= box.y1; ++y)
    for (int x = box.x0; x <= box.x1; ++x)
      if (x >= 0 && x < grid && y >= 0 && y < grid)
        mask[static_cast<std::size_t>(y * grid + x)] = 1;
  return mask;
}

Mask dilate8(const Mask& mask, int grid) {
  Mask out(mask.size(), 0);
  for (int y = 0; y < grid; ++y)
    for (int x = 0; x < grid; ++x) {
      bool hit = false;
      for (int dy = -1; dy <= 1 && !hit; ++dy)
        for (int dx = -1; dx <= 1 && !hit; ++dx) {
          int ny = y + dy, nx = x + dx;
          if (ny < 0 || ny >= grid || nx < 0 || nx >= grid) continue;
          if (mask[static_cast<std::size_t>(ny * grid + nx)]) hit = true;
        }
      out[static_cast<std::size_t>(y * grid + x)] = hit ? 1 : 0;
    }
  return out;
}

Mask erode8(const Mask& mask, int grid) {
  Mask out(mask.size(), 0);
  for (int y = 0; y < grid; ++y)
    for (int x = 0; x < grid; ++x) {
      bool all = true;
      for (int dy = -1; dy <= 1 && all; ++dy)
        for (int dx = -1; dx <= 1 && all; ++dx) {
          int ny = y + dy, nx = x + dx;
          // Outside the grid counts as background, so border cells erode away.
          if (ny < 0 || ny >= grid || nx < 0 || nx >= grid) {
            all = false;
          } else if (!mask[static_cast<std::size_t>(ny * grid + nx)]) {
            all = false;
          }
        }
      out[static_cast<std::size_t>(y * grid + x)] = all ? 1 : 0;
    }
  return out;
}

Box mask_bounding_box(const Mask& mask, int grid) {
  Box box{grid, grid, -1, -1};
  for (int y = 0; y < grid; ++y)
    for (int x = 0; x < grid; ++x)
      if (mask[static_cast<std::size_t>(y * grid + x)]) {
        if (x < box.x0) box.x0 = x;
        if (y < box.y0) box.y0 = y;
        if (x > box.x1) box.x1 = x;
        if (y > box.y1) box.y1 = y;
      }
  require(box.x1 >= 0, ErrorKind::empty_support, "bounding box of empty mask");
  return box;
}

namespace {

ordered_json scene_to_json(const Scene& scene) {
  ordered_json j;
  j["grid"] = scene.grid;
  j["classes"] = scene.num_classes;
  j["d_vis"] = scene.d_vis;
  j["noise"] = scene.noise_sigma;
  j["bg_seed"] = scene.bg_seed;
  j["objects"] = ordered_json::array();
  for (const PlacedObject& obj : scene.objects) {
    ordered_json o;
    o["class"] = obj.class_id;
    o["box"] = {obj.box.x0, obj.box.y0, obj.box.x1, obj.box.y1};
    j["objects"].push_back(std::move(o));
  }
  return j;
}

Scene scene_from_json(const ordered_json& j) {
  Scene scene;
  scene.grid = j.at("grid").get<int>();
  scene.num_classes = j.at("classes").get<int>();
  scene.d_vis = j.at("d_vis").get<int>();
  scene.noise_sigma = j.at("noise").get<double>();
  scene.bg_seed = j.at("bg_seed").get<std::uint64_t>();
  for (const auto& o : j.at("objects")) {
    PlacedObject obj;
    obj.class_id = o.at("class").get<int>();
    const auto& b = o.at("box");
    require(b.is_array() && b.size() == 4, ErrorKind::parse, "box must have 4 entries");
    obj.box = Box{b[0].get<int>(), b[1].get<int>(), b[2].get<int>(), b[3].get<int>()};
    scene.objects.push_back(obj);
  }
  return scene;
}

template <typename Fn>
auto rethrow_parse(Fn&& fn, const std::string& what) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    fail(ErrorKind::parse, what + ": " + e.what());
  }
}

}  // namespace

std::string scene_to_json_line(const Scene& scene) {
  ordered_json j;
  j["schema"] = 1;
  j["type"] = "scene";
  ordered_json body = scene_to_json(scene);
  for (auto& [key, value] : body.items()) j[key] = value;
  return j.dump();
}

Scene scene_from_json_line(const std::string& line) {
  return rethrow_parse(
      [&] {
        ordered_json j = ordered_json::parse(line);
        require(j.at("type").get<std::string>() == "scene", ErrorKind::parse,
                "expected a scene record");
        return scene_from_json(j);
      },
      "scene line");
}

std::string pair_to_json_line(const ControlPair& pair) {
  ordered_json j;
  j["schema"] = 1;
  j["type"] = "pair";
  j["target_class"] = pair.target_class;
  j["source"] = scene_to_json(pair.source);
  j["base"] = scene_to_json(pair.base);
  return j.dump();
}

ControlPair pair_from_json_line(const std::string& line) {
  return rethrow_parse(
      [&] {
        ordered_json j = ordered_json::parse(line);
        require(j.at("type").get<std::string>() == "pair", ErrorKind::parse,
                "expected a pair record");
        ControlPair pair;
        pair.target_class = j.at("target_class").get<int>();
        pair.source = scene_from_json(j.at("source"));
        pair.base = scene_from_json(j.at("base"));
        return pair;
      },
      "pair line");
}

namespace {

template <typename T, typename Encode>
void write_jsonl(const std::string& path, const std::vector<T>& records, Encode encode) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorKind::io, "cannot open for writing: " + path);
  for (const T& r : records) out << encode(r) << "\n";
  require(out.good(), ErrorKind::io, "write failed: " + path);
}

template <typename T, typename Decode>
std::vector<T> read_jsonl(const std::string& path, Decode decode) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::io, "cannot open for reading: " + path);
  std::vector<T> records;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    records.push_back(decode(line));
  }
  return records;
}

}  // namespace

void write_scenes_jsonl(const std::string& path, const std::vector<Scene>& scenes) {
  write_jsonl(path, scenes, scene_to_json_line);
}

std::vector<Scene> read_scenes_jsonl(const std::string& path) {
  return read_jsonl<Scene>(path, scene_from_json_line);
}

void write_pairs_jsonl(const std::string& path, const std::vector<ControlPair>& pairs) {
  write_jsonl(path, pairs, pair_to_json_line);
}

std::vector<ControlPair> read_pairs_jsonl(const std::string& path) {
  return read_jsonl<ControlPair>(path, pair_from_json_line);
}

}  // namespace vlmlens
