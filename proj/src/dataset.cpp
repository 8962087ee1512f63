#include "vym/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "vym/error.hpp"
#include "vym/image.hpp"
#include "vym/random.hpp"

namespace vym {

using Kind = DataError::Kind;

std::size_t view_index(View v) {
  return (v.side == Side::kEast ? 0 : 2) + static_cast<std::size_t>(v.camera - 1);
}

std::string view_code(View v) {
  return std::string(1, static_cast<char>(v.side)) + std::to_string(v.camera);
}

View parse_view_code(const std::string& code) {
  if (code.size() != 2 || (code[0] != 'E' && code[0] != 'W') || (code[1] != '1' && code[1] != '2')) {
    throw DataError(Kind::kInvalidArgument, "bad view code '" + code + "' (expected E1, E2, W1 or W2)");
  }
  return View{static_cast<Side>(code[0]), code[1] - '0'};
}

std::string ImageId::format() const {
  return std::to_string(plant) + static_cast<char>(cordon) + view_code(view);
}

ImageId parse_image_id(const std::string& text) {
  std::size_t i = 0;
  while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) ++i;
  if (i == 0) throw DataError(Kind::kMalformed, "image id '" + text + "': plant number missing");
  if (i > 9) throw DataError(Kind::kMalformed, "image id '" + text + "': plant number too large");
  if (text.size() != i + 3) {
    throw DataError(Kind::kMalformed, "image id '" + text + "': expected <plant><cordon><side><camera>");
  }
  std::vector<std::string> bad;
  const char c = text[i], s = text[i + 1], cam = text[i + 2];
  if (c != 'N' && c != 'S') bad.push_back(std::string("cordon '") + c + "'");
  if (s != 'E' && s != 'W') bad.push_back(std::string("side '") + s + "'");
  if (cam != '1' && cam != '2') bad.push_back(std::string("camera '") + cam + "'");
  if (!bad.empty()) {
    std::string msg = "image id '" + text + "': invalid";
    for (std::size_t k = 0; k < bad.size(); ++k) msg += (k ? ", " : " ") + bad[k];
    throw DataError(Kind::kMalformed, msg);
  }
  ImageId id;
  // Leading zeros would break format(parse(x)) == x.
  if (text[0] == '0') throw DataError(Kind::kMalformed, "image id '" + text + "': plant has leading zero");
  id.plant = std::stoi(text.substr(0, i));
  id.cordon = static_cast<Cordon>(c);
  id.view = View{static_cast<Side>(s), cam - '0'};
  return id;
}

std::string CordonExample::key() const {
  return std::to_string(plant) + static_cast<char>(cordon);
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (char ch : line) {
    if (ch == '"') {
      quoted = !quoted;
    } else if (ch == ',' && !quoted) {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  fields.push_back(cur);
  for (auto& f : fields) {
    const auto b = f.find_first_not_of(" \t");
    const auto e = f.find_last_not_of(" \t");
    f = b == std::string::npos ? std::string() : f.substr(b, e - b + 1);
  }
  return fields;
}

const std::array<std::string, 7> kHeader = {"plant", "cordon", "img_E1", "img_E2",
                                            "img_W1", "img_W2", "weight_g"};

}  // namespace

Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(Kind::kMissingFile, "cannot open manifest " + path.string());
  const auto base = path.parent_path();
  std::string line;
  if (!std::getline(in, line)) throw DataError(Kind::kMalformed, path.string() + ": missing header");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = split_csv_line(line);
  if (!std::equal(header.begin(), header.end(), kHeader.begin(), kHeader.end())) {
    throw DataError(Kind::kMalformed, path.string() + ": header must be plant,cordon,img_E1,img_E2,img_W1,img_W2,weight_g");
  }

  Manifest m;
  std::set<std::pair<int, char>> seen;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    auto f = split_csv_line(line);
    if (f.size() != kHeader.size()) {
      throw DataError(Kind::kMalformed, where + ": expected 7 fields, got " + std::to_string(f.size()));
    }
    CordonExample e;
    try {
      std::size_t used = 0;
      e.plant = std::stoi(f[0], &used);
      if (used != f[0].size() || e.plant <= 0) throw std::invalid_argument("plant");
    } catch (const std::exception&) {
      throw DataError(Kind::kMalformed, where + ": bad plant number '" + f[0] + "'");
    }
    if (f[1] != "N" && f[1] != "S") throw DataError(Kind::kMalformed, where + ": bad cordon '" + f[1] + "'");
    e.cordon = static_cast<Cordon>(f[1][0]);
    for (std::size_t v = 0; v < 4; ++v) {
      if (f[2 + v].empty()) {
        throw DataError(Kind::kIncompleteExample, where + ": incomplete example " + e.key() +
                                                      ": missing view " + view_code(kViewOrder[v]));
      }
      e.images[v] = base / f[2 + v];
    }
    try {
      std::size_t used = 0;
      e.weight_g = std::stod(f[6], &used);
      if (used != f[6].size() || !std::isfinite(e.weight_g)) throw std::invalid_argument("weight");
    } catch (const std::exception&) {
      throw DataError(Kind::kMalformed, where + ": bad weight '" + f[6] + "'");
    }
    if (e.weight_g < 0) {
      throw DataError(Kind::kNegativeWeight, where + ": negative weight for " + e.key());
    }
    if (!seen.emplace(e.plant, static_cast<char>(e.cordon)).second) {
      throw DataError(Kind::kDuplicateExample, where + ": duplicate example " + e.key());
    }
    for (const auto& img : e.images) {
      if (!std::filesystem::exists(img)) {
        throw DataError(Kind::kMissingFile, where + ": missing image file " + img.string());
      }
      const auto im = read_image(img);
      m.canvas.width = std::max(m.canvas.width, im.width());
      m.canvas.height = std::max(m.canvas.height, im.height());
    }
    m.examples.push_back(std::move(e));
  }
  return m;
}

void write_manifest(const std::filesystem::path& path, const std::vector<CordonExample>& examples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(Kind::kIo, "cannot write manifest " + path.string());
  const auto base = path.parent_path();
  for (std::size_t i = 0; i < kHeader.size(); ++i) out << (i ? "," : "") << kHeader[i];
  out << '\n';
  for (const auto& e : examples) {
    out << e.plant << ',' << static_cast<char>(e.cordon);
    for (const auto& img : e.images) {
      out << ',' << (img.is_relative() ? img : std::filesystem::relative(img, base)).generic_string();
    }
    std::ostringstream w;
    w.precision(17);
    w << e.weight_g;
    out << ',' << w.str() << '\n';
  }
  if (!out) throw DataError(Kind::kIo, "failed writing manifest " + path.string());
}

std::size_t FoldPlan::fold_of(const CordonExample& e) const {
  auto it = plant_fold.find(e.plant);
  if (it == plant_fold.end()) {
    throw DataError(Kind::kInvalidArgument, "plant " + std::to_string(e.plant) + " not in fold plan");
  }
  return it->second;
}

std::vector<std::size_t> FoldPlan::test_indices(const std::vector<CordonExample>& examples,
                                                std::size_t f) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    if (fold_of(examples[i]) == f) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> FoldPlan::train_indices(const std::vector<CordonExample>& examples,
                                                 std::size_t f) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    if (fold_of(examples[i]) != f) out.push_back(i);
  }
  return out;
}

std::string FoldPlan::fingerprint() const {
  std::uint64_t h = hash_name("k=" + std::to_string(k));
  for (const auto& [plant, fold] : plant_fold) {
    h = mix_seed(h ^ hash_name(std::to_string(plant) + ":" + std::to_string(fold)));
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

nlohmann::json FoldPlan::to_json() const {
  nlohmann::json j;
  j["k"] = k;
  j["seed"] = seed;
  j["fingerprint"] = fingerprint();
  auto& a = j["assignments"] = nlohmann::json::object();
  for (const auto& [plant, fold] : plant_fold) a[std::to_string(plant)] = fold;
  return j;
}

FoldPlan FoldPlan::from_json(const nlohmann::json& j) {
  FoldPlan p;
  p.k = j.at("k").get<std::size_t>();
  p.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& [plant, fold] : j.at("assignments").items()) {
    p.plant_fold[std::stoi(plant)] = fold.get<std::size_t>();
  }
  return p;
}

namespace {

std::vector<int> distinct_plants(const std::vector<CordonExample>& examples,
                                 const std::vector<std::size_t>& indices) {
  std::set<int> s;
  for (auto i : indices) s.insert(examples[i].plant);
  return {s.begin(), s.end()};
}

}  // namespace

FoldPlan make_folds(const std::vector<CordonExample>& examples, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw DataError(Kind::kInvalidArgument, "make_folds: k must be >= 2, got " + std::to_string(k));
  std::vector<std::size_t> all(examples.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  auto plants = distinct_plants(examples, all);
  if (plants.size() < k) {
    throw DataError(Kind::kInvalidArgument, "make_folds: " + std::to_string(plants.size()) +
                                                " plants cannot fill " + std::to_string(k) + " folds");
  }
  Rng rng(derive_seed(seed, hash_name("folds")));
  rng.shuffle(plants.begin(), plants.end());
  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  for (std::size_t i = 0; i < plants.size(); ++i) plan.plant_fold[plants[i]] = i % k;
  return plan;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_validation(
    const std::vector<CordonExample>& examples, const std::vector<std::size_t>& indices,
    double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 0.5)) {
    throw DataError(Kind::kInvalidArgument, "split_validation: fraction must be in (0, 0.5)");
  }
  auto plants = distinct_plants(examples, indices);
  const auto n_val = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(plants.size())));
  if (n_val == 0 || n_val >= plants.size()) {
    throw DataError(Kind::kInvalidArgument, "split_validation: " + std::to_string(plants.size()) +
                                                " plants too few for a validation set");
  }
  Rng rng(derive_seed(seed, hash_name("validation")));
  rng.shuffle(plants.begin(), plants.end());
  const std::set<int> val_plants(plants.begin(), plants.begin() + static_cast<long>(n_val));
  std::vector<std::size_t> train, val;
  for (auto i : indices) (val_plants.count(examples[i].plant) ? val : train).push_back(i);
  return {train, val};
}

}  // namespace vym
