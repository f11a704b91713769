#pragma once

// COCO instance annotations -> (image, category, count) triples.

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "countvqa/errors.hpp"
#include "countvqa/jsonl.hpp"

namespace countvqa {

struct CocoImage {
  std::int64_t image_id = 0;
  std::string file_name;
};

struct CocoAnnotation {
  std::int64_t image_id = 0;
  std::int64_t category_id = 0;
  bool iscrowd = false;
  std::array<double, 4> bbox{};
};

struct CocoCategory {
  std::int64_t category_id = 0;
  std::string name;
};

struct AnnotationFile {
  std::vector<CocoImage> images;
  std::vector<CocoAnnotation> annotations;
  std::vector<CocoCategory> categories;
};

/// One benchmark atom: `count` objects of `category` visible in one image.
struct CountInstance {
  std::int64_t image_id = 0;
  std::string image_ref;
  std::string category;
  int count = 0;

  friend bool operator==(const CountInstance&, const CountInstance&) = default;
};

/// Total order used for every emitted dataset: image, then category.
inline bool instance_less(const CountInstance& a, const CountInstance& b) {
  return std::tie(a.image_id, a.category, a.count, a.image_ref) <
         std::tie(b.image_id, b.category, b.count, b.image_ref);
}

inline void sort_instances(std::vector<CountInstance>& v) {
  std::sort(v.begin(), v.end(), instance_less);
}

namespace detail {

inline std::int64_t get_id(const json& obj, const char* field, const std::string& where) {
  auto it = obj.find(field);
  if (it == obj.end() || !it->is_number_integer()) {
    throw IntegrityError(where + ": missing or non-integer \"" + field + "\"");
  }
  return it->get<std::int64_t>();
}

inline const json& get_array(const json& root, const char* field) {
  auto it = root.find(field);
  if (it == root.end() || !it->is_array()) {
    throw IntegrityError(std::string("annotation file: missing array \"") + field + "\"");
  }
  return *it;
}

}  // namespace detail

/// Builds an AnnotationFile from an already-parsed COCO document and checks
/// referential integrity. Unknown fields are ignored.
inline AnnotationFile annotations_from_json(const json& root) {
  if (!root.is_object()) throw IntegrityError("annotation file: top level is not an object");
  AnnotationFile a;

  std::unordered_set<std::int64_t> image_ids;
  for (const auto& img : detail::get_array(root, "images")) {
    CocoImage im;
    im.image_id = detail::get_id(img, "id", "image");
    auto fn = img.find("file_name");
    if (fn == img.end() || !fn->is_string()) {
      throw IntegrityError("image " + std::to_string(im.image_id) + ": missing file_name");
    }
    im.file_name = fn->get<std::string>();
    if (!image_ids.insert(im.image_id).second) {
      throw IntegrityError("duplicate image id " + std::to_string(im.image_id));
    }
    a.images.push_back(std::move(im));
  }

  std::unordered_set<std::int64_t> category_ids;
  std::unordered_set<std::string> category_names;
  for (const auto& cat : detail::get_array(root, "categories")) {
    CocoCategory c;
    c.category_id = detail::get_id(cat, "id", "category");
    auto nm = cat.find("name");
    if (nm == cat.end() || !nm->is_string() || nm->get<std::string>().empty()) {
      throw IntegrityError("category " + std::to_string(c.category_id) + ": missing name");
    }
    c.name = nm->get<std::string>();
    if (!category_ids.insert(c.category_id).second) {
      throw IntegrityError("duplicate category id " + std::to_string(c.category_id));
    }
    if (!category_names.insert(c.name).second) {
      throw IntegrityError("duplicate category name \"" + c.name + "\"");
    }
    a.categories.push_back(std::move(c));
  }

  std::size_t index = 0;
  for (const auto& ann : detail::get_array(root, "annotations")) {
    const std::string where = "annotation #" + std::to_string(index++);
    CocoAnnotation an;
    an.image_id = detail::get_id(ann, "image_id", where);
    an.category_id = detail::get_id(ann, "category_id", where);
    if (!image_ids.contains(an.image_id)) {
      throw IntegrityError(where + " references unknown image_id " + std::to_string(an.image_id));
    }
    if (!category_ids.contains(an.category_id)) {
      throw IntegrityError(where + " references unknown category_id " +
                           std::to_string(an.category_id));
    }
    if (auto crowd = ann.find("iscrowd"); crowd != ann.end()) {
      if (crowd->is_boolean()) {
        an.iscrowd = crowd->get<bool>();
      } else if (crowd->is_number_integer() && (*crowd == 0 || *crowd == 1)) {
        an.iscrowd = crowd->get<int>() == 1;
      } else {
        throw IntegrityError(where + ": iscrowd must be 0 or 1");
      }
    }
    auto bbox = ann.find("bbox");
    if (bbox == ann.end() || !bbox->is_array() || bbox->size() != 4) {
      throw IntegrityError(where + ": bbox must be an array of 4 numbers");
    }
    for (std::size_t i = 0; i < 4; ++i) {
      if (!(*bbox)[i].is_number()) throw IntegrityError(where + ": bbox must be numeric");
      an.bbox[i] = (*bbox)[i].get<double>();
    }
    a.annotations.push_back(an);
  }
  return a;
}

inline AnnotationFile load_annotations(const std::filesystem::path& path) {
  return annotations_from_json(parse_json_text(read_file(path), path.string()));
}

/// Counts annotations per (image, category). A pair that has any crowd
/// annotation is dropped entirely, since its box count is not an object
/// count. Zero counts never appear. Output is sorted (image_id, category).
inline std::vector<CountInstance> build_count_dataset(const AnnotationFile& a) {
  std::unordered_map<std::int64_t, const CocoImage*> images;
  for (const auto& im : a.images) images.emplace(im.image_id, &im);
  std::unordered_map<std::int64_t, const CocoCategory*> categories;
  for (const auto& c : a.categories) categories.emplace(c.category_id, &c);

  struct Tally {
    int count = 0;
    bool crowd = false;
  };
  std::map<std::pair<std::int64_t, std::int64_t>, Tally> tallies;
  for (const auto& an : a.annotations) {
    auto& t = tallies[{an.image_id, an.category_id}];
    if (an.iscrowd) {
      t.crowd = true;
    } else {
      ++t.count;
    }
  }

  std::vector<CountInstance> out;
  out.reserve(tallies.size());
  for (const auto& [key, t] : tallies) {
    if (t.crowd || t.count == 0) continue;
    const auto img = images.find(key.first);
    const auto cat = categories.find(key.second);
    if (img == images.end() || cat == categories.end()) {
      throw IntegrityError("dangling reference for image " + std::to_string(key.first));
    }
    out.push_back({key.first, img->second->file_name, cat->second->name, t.count});
  }
  sort_instances(out);
  return out;
}

inline constexpr std::string_view kInstanceSchema = "ci/1";

inline json to_json(const CountInstance& ci) {
  return json{{"schema", kInstanceSchema},
              {"image_id", ci.image_id},
              {"image_ref", ci.image_ref},
              {"category", ci.category},
              {"count", ci.count}};
}

inline CountInstance instance_from_json(const json& obj, const std::string& where) {
  require_schema(obj, kInstanceSchema, where);
  try {
    CountInstance ci{obj.at("image_id").get<std::int64_t>(), obj.at("image_ref").get<std::string>(),
                     obj.at("category").get<std::string>(), obj.at("count").get<int>()};
    if (ci.count < 1) throw DataError(where + ": count must be >= 1");
    return ci;
  } catch (const json::exception& e) {
    throw DataError(where + ": " + e.what());
  }
}

/// One JSON line per instance, in list order.
inline std::string instances_to_jsonl(const std::vector<CountInstance>& v) {
  std::string out;
  for (const auto& ci : v) {
    out += to_json(ci).dump();
    out += '\n';
  }
  return out;
}

inline void write_instances(const std::filesystem::path& path, const std::vector<CountInstance>& v) {
  write_text_atomic(path, instances_to_jsonl(v));
}

inline std::vector<CountInstance> read_instances(const std::filesystem::path& path) {
  std::vector<CountInstance> out;
  for_each_jsonl(path, [&](const json& obj, std::size_t line) {
    out.push_back(instance_from_json(obj, path.string() + ":" + std::to_string(line)));
  });
  return out;
}

}  // namespace countvqa
