#include "cvc/services/mocks.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>

#include "cvc/core/digest.hpp"
#include "cvc/core/errors.hpp"
#include "cvc/core/random.hpp"
#include "cvc/core/serialize.hpp"
#include "cvc/image/image.hpp"
#include "cvc/toyworld/scene.hpp"

namespace cvc::services {

namespace {

using nlohmann::json;

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '-'; }

// Case-insensitive whole-word occurrences of `word` in `text`.
std::vector<std::size_t> word_positions(std::string_view text, std::string_view word) {
  std::vector<std::size_t> out;
  std::size_t from = 0;
  while (auto pos = find_ci(text, word, from)) {
    const std::size_t end = *pos + word.size();
    const bool left = *pos == 0 || !is_word_char(text[*pos - 1]);
    const bool right = end == text.size() || !is_word_char(text[end]);
    if (left && right) out.push_back(*pos);
    from = *pos + 1;
  }
  return out;
}

std::string preceding_word(std::string_view text, std::size_t pos) {
  std::size_t e = pos;
  while (e > 0 && text[e - 1] == ' ') --e;
  std::size_t b = e;
  while (b > 0 && is_word_char(text[b - 1])) --b;
  return std::string(text.substr(b, e - b));
}

std::string input_after(const std::string& prompt, std::string_view marker) {
  const auto pos = prompt.rfind(marker);
  if (pos == std::string::npos) return {};
  return prompt.substr(pos + marker.size());
}

double uniform_from_hash(std::string_view material) {
  return static_cast<double>(hash64(material) >> 11) * 0x1.0p-53;
}

int intersect_area(const Box& a, const Box& b) {
  const int w = std::min(a.x1, b.x1) - std::max(a.x0, b.x0);
  const int h = std::min(a.y1, b.y1) - std::max(a.y0, b.y0);
  return w > 0 && h > 0 ? w * h : 0;
}

std::vector<std::uint8_t> decode_b64_field(const json& payload, const char* name) {
  try {
    return base64_decode(payload.at(name).get<std::string>());
  } catch (const ProtocolError& e) {
    throw RequestError(400, std::string("field '") + name + "': " + e.what());
  }
}

Image decode_payload_image(const json& payload) {
  const auto bytes = decode_b64_field(payload, "image_png_b64");
  try {
    return decode_image(bytes);
  } catch (const Error& e) {
    throw RequestError(400, std::string("field 'image_png_b64' is not a decodable image: ") + e.what());
  }
}

}  // namespace

std::string MockScript::text_fingerprint(const std::string& prompt) { return sha256_hex(prompt); }

std::string MockScript::mlm_fingerprint(const std::string& context, const std::string& target) {
  return sha256_hex(context + '\x1f' + target);
}

void MockScript::script_text(const std::string& prompt, std::vector<std::string> completions) {
  text[text_fingerprint(prompt)] = std::move(completions);
}

void MockScript::script_mlm(const std::string& context, const std::string& target, std::vector<double> log_probs) {
  mlm[mlm_fingerprint(context, target)] = std::move(log_probs);
}

void MockScript::script_similarity(const std::string& text_in, const std::string& anchor, double cosine) {
  embed_aliases[text_in] = {anchor, cosine};
}

nlohmann::json MockScript::to_json() const {
  json aliases = json::object();
  for (const auto& [k, v] : embed_aliases) aliases[k] = {{"anchor", v.first}, {"cosine", v.second}};
  return {{"text", text}, {"mlm", mlm}, {"embed_aliases", aliases}, {"lexicon", lexicon}, {"vl_drop_last", vl_drop_last}};
}

MockScript MockScript::from_json(const nlohmann::json& j) {
  MockScript s;
  if (j.contains("text")) j.at("text").get_to(s.text);
  if (j.contains("mlm")) j.at("mlm").get_to(s.mlm);
  if (j.contains("embed_aliases")) {
    for (const auto& [k, v] : j.at("embed_aliases").items()) {
      s.embed_aliases[k] = {v.at("anchor").get<std::string>(), v.at("cosine").get<double>()};
    }
  }
  if (j.contains("lexicon")) j.at("lexicon").get_to(s.lexicon);
  s.vl_drop_last = j.value("vl_drop_last", false);
  return s;
}

MockScript MockScript::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read mock script " + path);
  return from_json(json::parse(in));
}

MockServices::MockServices(MockScript script) : script_(std::move(script)) {
  if (script_.lexicon.empty()) {
    for (const auto& term : toyworld::vocabulary()) script_.lexicon.emplace_back(term.name);
  }
}

json MockServices::handle(ServiceKind kind, const json& payload) const {
  try {
    validate_request(kind, payload);
  } catch (const ProtocolError& e) {
    throw RequestError(400, e.what());
  }
  switch (kind) {
    case ServiceKind::text_generate: return text_generate(payload);
    case ServiceKind::vl_generate: return vl_generate(payload);
    case ServiceKind::mlm_score: return mlm_score(payload);
    case ServiceKind::ground: return ground(payload);
    case ServiceKind::segment: return segment(payload);
    case ServiceKind::embed: return embed(payload);
  }
  throw RequestError(400, "unknown service kind");
}

std::string MockServices::rule_based_completion(const std::string& prompt) const {
  if (prompt.starts_with("You are an entity extractor")) {
    auto input = input_after(prompt, "\nText: ");
    if (auto end = input.find("\nExtracted entities:"); end != std::string::npos) input.resize(end);
    std::vector<std::pair<std::size_t, std::string>> hits;
    for (const auto& term : script_.lexicon) {
      const auto positions = word_positions(input, term);
      if (!positions.empty()) hits.emplace_back(positions.front(), term);
    }
    std::sort(hits.begin(), hits.end());
    std::string out = "<begin>\n";
    int k = 1;
    for (const auto& [pos, term] : hits) {
      std::string full = term;
      const auto prev = to_lower(preceding_word(input, pos));
      for (const auto& color : toyworld::palette()) {
        if (prev == color.name) full = prev + " " + term;
      }
      out += std::to_string(k++) + ". " + full + " -> " + term + "\n";
    }
    return out + "<end>";
  }
  if (prompt.starts_with("You are a question constructor")) {
    return "<begin>\nQuestion: In the given image, there is an object that is heavily occluded by a cluster of gray "
           "blocks. Please answer the following question.\nWhat might the object occluded by the gray blocks be? "
           "Please provide your reasoning process and confirm a unique answer.\n<end>";
  }
  if (prompt.starts_with("You are an answer extractor")) {
    const auto input = input_after(prompt, "\nText: ");
    std::string answer(kUnknownAnswer);
    const auto lower = to_lower(input);
    if (auto pos = lower.rfind("final answer:"); pos != std::string::npos) {
      auto rest = input.substr(pos + 13);
      rest = rest.substr(0, rest.find_first_of(".\n"));
      rest = trim(rest);
      if (!rest.empty()) answer = rest;
    }
    return "<begin>\nExtracted Answer: " + answer + "\n<end>";
  }
  return "<begin>\n<end>";
}

json MockServices::text_generate(const json& payload) const {
  const auto prompt = payload.at("prompt").get<std::string>();
  const auto n = payload.at("n").get<int>();
  std::vector<std::string> scripted;
  if (auto it = script_.text.find(MockScript::text_fingerprint(prompt)); it != script_.text.end()) {
    scripted = it->second;
  }
  if (scripted.empty()) scripted.push_back(rule_based_completion(prompt));
  std::vector<std::string> out;
  for (int i = 0; i < n; ++i) out.push_back(scripted[static_cast<std::size_t>(i) % scripted.size()]);
  return {{"completions", out}};
}

json MockServices::vl_generate(const json& payload) const {
  const auto image = decode_payload_image(payload);
  const int n = payload.at("n").get<int>();
  const auto seed = payload.at("seed").get<std::uint64_t>();
  const auto image_digest = sha256_hex(std::span<const std::uint8_t>(image.pixels()));

  // Identify the occluded object: the scene object with the most pixels that
  // differ from a clean rendering of the scene.
  std::optional<std::size_t> target;
  std::vector<std::string> names;
  if (const auto scene = toyworld::scene_from_image(image);
      scene && scene->width == image.width() && scene->height == image.height()) {
    const auto clean = toyworld::render_scene(*scene);
    std::size_t best = 0;
    for (std::size_t i = 0; i < scene->objects.size(); ++i) {
      const auto mask = toyworld::object_mask(*scene, i);
      std::size_t changed = 0;
      for (int y = 0; y < image.height(); ++y) {
        for (int x = 0; x < image.width(); ++x) {
          if (mask.get(x, y) && image.at(x, y) != clean.at(x, y)) ++changed;
        }
      }
      if (changed > best) {
        best = changed;
        target = i;
      }
    }
    if (target) {
      const auto& obj = scene->objects[*target];
      for (const auto& term : toyworld::vocabulary()) {
        if (term.name != obj.name) names.emplace_back(term.name);
      }
      names.insert(names.begin(), obj.name);
    }
  }

  const int count = script_.vl_drop_last ? std::max(0, n - 1) : n;
  std::vector<std::string> out;
  for (int j = 0; j < count; ++j) {
    Rng rng(derive_seed(seed, "vl", image_digest + ":" + std::to_string(j)));
    if (!target) {
      out.emplace_back("The image does not show any clearly occluded region, so the object cannot be determined. "
                       "Final answer: unknown.");
      continue;
    }
    const auto scene = toyworld::scene_from_image(image);
    const double p = scene->objects[*target].success_p;
    const double u = uniform_unit(rng);
    if (u < p) {
      out.push_back("Looking at the visible surroundings, the shape and placement of the covered region match a " +
                    names.front() + ". Final answer: " + names.front() + ".");
    } else if (uniform_unit(rng) < 0.2) {
      out.emplace_back("The gray blocks hide too much of the object to be certain what it is. Final answer: unknown.");
    } else {
      const auto& wrong = names[1 + static_cast<std::size_t>(uniform_index(rng, names.size() - 1))];
      out.push_back("Judging from the nearby objects, the occluded item is probably a " + wrong +
                    ". Final answer: " + wrong + ".");
    }
  }
  return {{"completions", out}};
}

json MockServices::mlm_score(const json& payload) const {
  const auto context = payload.at("context").get<std::string>();
  const auto target = payload.at("target").get<std::string>();
  std::vector<double> log_probs;
  if (auto it = script_.mlm.find(MockScript::mlm_fingerprint(context, target)); it != script_.mlm.end()) {
    log_probs = it->second;
  } else {
    // One pseudo-subword per whitespace-separated word.
    std::size_t words = 0;
    bool in_word = false;
    for (char c : target) {
      const bool space = std::isspace(static_cast<unsigned char>(c)) != 0;
      if (!space && !in_word) ++words;
      in_word = !space;
    }
    words = std::max<std::size_t>(words, 1);
    for (std::size_t i = 0; i < words; ++i) {
      const double u = uniform_from_hash(context + '\x1f' + target + '\x1f' + std::to_string(i));
      log_probs.push_back(std::log(0.02 + 0.96 * u));
    }
  }
  double sum = 0.0;
  for (double lp : log_probs) sum += lp;
  const double score = log_probs.empty() ? 0.0 : std::clamp(std::exp(sum / static_cast<double>(log_probs.size())), 0.0, 1.0);
  return {{"log_probs", log_probs}, {"score", score}};
}

json MockServices::ground(const json& payload) const {
  const auto image = decode_payload_image(payload);
  const auto phrase = to_lower(trim(payload.at("phrase").get<std::string>()));
  json boxes = json::array();
  if (const auto scene = toyworld::scene_from_image(image)) {
    std::vector<std::pair<double, std::size_t>> hits;
    for (std::size_t i = 0; i < scene->objects.size(); ++i) {
      const auto name = to_lower(scene->objects[i].name);
      const bool match = phrase == name || (phrase.size() > name.size() && phrase.ends_with(" " + name));
      if (match) hits.emplace_back(scene->objects[i].ground_score, i);
    }
    std::stable_sort(hits.begin(), hits.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    for (const auto& [score, i] : hits) {
      const auto& b = scene->objects[i].box;
      boxes.push_back({{"x0", b.x0}, {"y0", b.y0}, {"x1", b.x1}, {"y1", b.y1}, {"score", score}});
    }
  }
  return {{"boxes", boxes}};
}

json MockServices::segment(const json& payload) const {
  const auto image = decode_payload_image(payload);
  const auto& b = payload.at("box");
  const Box box{static_cast<int>(b.at("x0").get<double>()), static_cast<int>(b.at("y0").get<double>()),
                static_cast<int>(b.at("x1").get<double>()), static_cast<int>(b.at("y1").get<double>())};
  Bitmap mask(image.width(), image.height());
  if (const auto scene = toyworld::scene_from_image(image)) {
    std::optional<std::size_t> best;
    double best_iou = 0.5;
    for (std::size_t i = 0; i < scene->objects.size(); ++i) {
      const auto& ob = scene->objects[i].box;
      if (ob == box) {
        best = i;
        break;
      }
      const double inter = intersect_area(ob, box);
      const double uni = ob.width() * ob.height() + box.width() * box.height() - inter;
      if (uni > 0 && inter / uni >= best_iou) {
        best_iou = inter / uni;
        best = i;
      }
    }
    if (best) mask = toyworld::object_mask(*scene, *best);
  }
  return {{"mask_png_b64", base64_encode(encode_png(mask))}};
}

std::vector<double> MockServices::embedding(const std::string& text) const {
  auto base = [](const std::string& s) {
    Rng rng(hash64("embed\x1f" + s));
    std::vector<double> v(kEmbeddingDim);
    double norm = 0.0;
    for (auto& x : v) {
      x = 2.0 * uniform_unit(rng) - 1.0;
      norm += x * x;
    }
    norm = std::sqrt(norm);
    for (auto& x : v) x /= norm;
    return v;
  };
  auto v = base(text);
  if (auto it = script_.embed_aliases.find(text); it != script_.embed_aliases.end()) {
    const auto anchor = base(it->second.first);
    const double c = std::clamp(it->second.second, -1.0, 1.0);
    // Orthogonalize v against the anchor, then mix so that <result, anchor> = c.
    double dot = 0.0;
    for (int i = 0; i < kEmbeddingDim; ++i) dot += v[static_cast<std::size_t>(i)] * anchor[static_cast<std::size_t>(i)];
    double norm = 0.0;
    for (int i = 0; i < kEmbeddingDim; ++i) {
      auto& x = v[static_cast<std::size_t>(i)];
      x -= dot * anchor[static_cast<std::size_t>(i)];
      norm += x * x;
    }
    norm = std::sqrt(norm);
    const double s = std::sqrt(1.0 - c * c);
    for (int i = 0; i < kEmbeddingDim; ++i) {
      auto& x = v[static_cast<std::size_t>(i)];
      x = c * anchor[static_cast<std::size_t>(i)] + s * x / norm;
    }
  }
  return v;
}

json MockServices::embed(const json& payload) const {
  json vectors = json::array();
  for (const auto& t : payload.at("texts")) vectors.push_back(embedding(t.get<std::string>()));
  return {{"vectors", vectors}};
}

MockTransport::MockTransport(std::shared_ptr<const MockServices> services) : services_(std::move(services)) {}

HttpReply MockTransport::post(const std::string&, const std::string& path, const std::string& body) {
  struct InFlight {
    explicit InFlight(MockTransport& t) : t_(t) {
      const auto now = ++t_.in_flight_;
      auto prev = t_.max_in_flight_.load();
      while (now > prev && !t_.max_in_flight_.compare_exchange_weak(prev, now)) {
      }
    }
    ~InFlight() { --t_.in_flight_; }
    MockTransport& t_;
  } guard(*this);

  ServiceKind kind{};
  try {
    kind = kind_from_path(path);
  } catch (const RequestError& e) {
    return {404, e.what()};
  }
  Interceptor interceptor;
  {
    std::lock_guard lock(mutex_);
    ++calls_[kind];
    auto& queue = failures_[kind];
    if (!queue.empty()) {
      const int status = queue.front();
      queue.pop_front();
      return {status, "scripted failure"};
    }
    interceptor = interceptor_;
  }
  json payload;
  try {
    payload = json::parse(body);
  } catch (const json::parse_error& e) {
    return {400, std::string("malformed JSON: ") + e.what()};
  }
  if (interceptor) {
    if (auto reply = interceptor(kind, payload)) return *reply;
  }
  try {
    return {200, canonical_dump(services_->handle(kind, payload))};
  } catch (const RequestError& e) {
    return {e.status(), e.what()};
  }
}

void MockTransport::fail_next(ServiceKind kind, std::vector<int> statuses) {
  std::lock_guard lock(mutex_);
  auto& queue = failures_[kind];
  queue.insert(queue.end(), statuses.begin(), statuses.end());
}

void MockTransport::set_interceptor(Interceptor interceptor) {
  std::lock_guard lock(mutex_);
  interceptor_ = std::move(interceptor);
}

std::size_t MockTransport::calls(ServiceKind kind) const {
  std::lock_guard lock(mutex_);
  auto it = calls_.find(kind);
  return it == calls_.end() ? 0 : it->second;
}

std::size_t MockTransport::total_calls() const {
  std::lock_guard lock(mutex_);
  std::size_t n = 0;
  for (const auto& [k, v] : calls_) n += v;
  return n;
}

}  // namespace cvc::services
