#include "cvc/core/corpus.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <map>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "cvc/core/errors.hpp"

namespace cvc {

namespace {

using nlohmann::json;

bool looks_like_raster(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  std::array<unsigned char, 8> head{};
  in.read(reinterpret_cast<char*>(head.data()), head.size());
  const auto got = in.gcount();
  static constexpr std::array<unsigned char, 8> kPng = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (got == 8 && head == kPng) return true;
  return got >= 3 && head[0] == 0xff && head[1] == 0xd8 && head[2] == 0xff;  // JPEG SOI
}

}  // namespace

std::string make_pair_id(long long image_id, long long annotation_id) {
  return "img" + std::to_string(image_id) + "-ann" + std::to_string(annotation_id);
}

std::vector<ImageCaptionPair> load_corpus(const std::filesystem::path& captions_file,
                                          const std::filesystem::path& image_root,
                                          const PipelineConfig& cfg) {
  std::ifstream in(captions_file);
  if (!in) {
    throw IngestError(IngestError::Kind::unreadable, "cannot read captions file: " + captions_file.string());
  }
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw IngestError(IngestError::Kind::unreadable,
                      "captions file is not valid JSON: " + captions_file.string() + ": " + e.what());
  }
  if (!doc.is_object() || !doc.contains("images") || !doc.contains("annotations") ||
      !doc["images"].is_array() || !doc["annotations"].is_array()) {
    throw IngestError(IngestError::Kind::schema, "captions file needs images[] and annotations[] arrays");
  }

  std::map<long long, std::string> files;
  for (const auto& img : doc["images"]) {
    if (!img.contains("id") || !img.contains("file_name")) {
      throw IngestError(IngestError::Kind::schema, "image entry without id/file_name: " + img.dump());
    }
    files[img["id"].get<long long>()] = img["file_name"].get<std::string>();
  }

  // image id -> (annotation id, caption), ordered by annotation id
  std::map<long long, std::map<long long, std::string>> captions;
  for (const auto& ann : doc["annotations"]) {
    if (!ann.contains("id") || !ann.contains("image_id") || !ann.contains("caption")) {
      throw IngestError(IngestError::Kind::schema, "annotation entry without id/image_id/caption: " + ann.dump());
    }
    const auto ann_id = ann["id"].get<long long>();
    const auto image_id = ann["image_id"].get<long long>();
    if (!files.contains(image_id)) {
      throw IngestError(IngestError::Kind::bad_reference,
                        "annotation " + std::to_string(ann_id) + " references missing image id " +
                            std::to_string(image_id));
    }
    auto text = trim(ann["caption"].get<std::string>());
    if (text.empty()) {
      spdlog::warn("annotation {} has an empty caption; skipped", ann_id);
      continue;
    }
    captions[image_id][ann_id] = std::move(text);
  }

  std::vector<ImageCaptionPair> pairs;
  for (const auto& [image_id, by_ann] : captions) {
    const auto path = image_root / files.at(image_id);
    if (!looks_like_raster(path)) {
      throw IngestError(IngestError::Kind::unresolved_image,
                        "image " + std::to_string(image_id) + " does not resolve to a PNG/JPEG file: " + path.string());
    }
    for (const auto& [ann_id, text] : by_ann) {
      pairs.push_back({make_pair_id(image_id, ann_id), path.string(), text});
      if (cfg.captions_per_image == CaptionSelection::first) break;
    }
  }
  if (pairs.empty()) {
    throw IngestError(IngestError::Kind::no_pairs, "captions file yielded zero image-caption pairs");
  }
  return pairs;
}

}  // namespace cvc
