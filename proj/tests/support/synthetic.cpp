#include "synthetic.hpp"

#include <array>
#include <atomic>
#include <fstream>
#include <random>
#include <sstream>

#include <unistd.h>

#include "relevancer/rng.hpp"

namespace synth {

namespace {

constexpr std::array kNouns = {"coffee table", "bar stool",  "area rug",      "desk lamp",
                               "bookshelf",    "bed frame",  "wall mirror",   "office chair",
                               "tv stand",     "nightstand", "dining bench",  "shoe rack"};
constexpr std::array kMods = {"wood",  "glass", "round", "white", "black", "oak",    "metal",  "velvet",
                              "small", "large", "rustic", "modern", "outdoor", "storage", "folding", "tall"};
constexpr std::array kBrands = {"hollis", "marlow", "ardent", "bexley", "corwin", "daltry", "elsing", "fenwick"};

}  // namespace

relevancer::Dataset corpus(const relevancer::LabelScheme& scheme, std::size_t n, std::uint64_t seed,
                           bool with_rationales, std::string salt) {
  relevancer::Rng rng(seed);
  relevancer::Dataset ds;
  ds.scheme = scheme;
  for (std::size_t i = 0; i < n; ++i) {
    auto pick = [&](const auto& arr) { return std::string(arr[rng.uniform(arr.size())]); };
    std::string noun = pick(kNouns), mod = pick(kMods), other = pick(kMods), brand = pick(kBrands);
    relevancer::LabeledExample ex;
    ex.pair.query = mod + " " + noun;
    ex.pair.product_title = brand + " " + other + " " + noun + " " + salt + "model " + std::to_string(i);
    ex.label = scheme.labels[i % scheme.size()];
    if (with_rationales) ex.rationale = "the title is a " + noun + " and the query asks for a " + mod + " one";
    ds.examples.push_back(std::move(ex));
  }
  return ds;
}

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  std::random_device rd;
  path_ = std::filesystem::temp_directory_path() /
          (tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++) + "-" + std::to_string(rd()));
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
}

std::filesystem::path fixture(const std::string& name) { return std::filesystem::path(RELEVANCER_FIXTURE_DIR) / name; }

}  // namespace synth
