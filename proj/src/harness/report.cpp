#include "sonarfit/harness/report.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include "sonarfit/error.hpp"

namespace sonarfit::harness {

using nlohmann::json;

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

void check_tables(const std::vector<ResultTable>& tables) {
  if (tables.empty()) fail(ErrorKind::InvalidArgument, "report: no result tables");
  for (const auto& t : tables) {
    for (const auto& r : t.rows) {
      if (!(r.accuracy_pct >= 0.0 && r.accuracy_pct <= 100.0)) {
        fail(ErrorKind::Numeric, "report: accuracy " + std::to_string(r.accuracy_pct) +
                                     " of subject " + std::to_string(r.subject) +
                                     " outside [0, 100]");
      }
    }
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write '" + path.string() + "'");
  out << text;
  if (!out) fail(ErrorKind::Io, "write to '" + path.string() + "' failed");
}

// Series order: closed-set runs before few-shot runs, then method, ratio, k.
using SeriesKey = std::tuple<bool, std::string, double, std::size_t>;

SeriesKey series_key(const ResultTable& t) {
  return {t.k_shot > 0, t.method, t.label_ratio, t.k_shot};
}

struct Series {
  std::string label;
  std::vector<const ResultTable*> runs;
};

std::map<SeriesKey, Series> group_series(const std::vector<ResultTable>& tables) {
  std::map<SeriesKey, Series> out;
  for (const auto& t : tables) {
    auto& s = out[series_key(t)];
    s.label = series_label(t);
    s.runs.push_back(&t);
  }
  for (auto& [key, s] : out) {
    std::stable_sort(s.runs.begin(), s.runs.end(),
                     [](const ResultTable* a, const ResultTable* b) { return a->seed < b->seed; });
  }
  return out;
}

std::vector<int> subjects_of(const std::vector<ResultTable>& tables) {
  std::set<int> s;
  for (const auto& t : tables) {
    for (const auto& r : t.rows) s.insert(r.subject);
  }
  return {s.begin(), s.end()};
}

std::pair<double, double> mean_std(const std::vector<double>& v) {
  if (v.empty()) return {std::nan(""), 0.0};
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  const double sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
  return {m, sd};
}

std::vector<double> subject_values(const Series& s, int subject) {
  std::vector<double> v;
  for (const auto* t : s.runs) {
    for (const auto& r : t->rows) {
      if (r.subject == subject) v.push_back(r.accuracy_pct);
    }
  }
  return v;
}

std::string subject_name(int subject) { return "S" + std::to_string(subject); }

// 5x7 glyphs, row-major, '#' set.
const std::map<char, const char*>& font() {
  static const std::map<char, const char*> glyphs = {
      {'0', ".###.#...##..###.#.###..##...#.###."}, {'1', "..#...##....#....#....#....#...###."},
      {'2', ".###.#...#....#...#...#...#...#####"}, {'3', "#####...#...#.....#.....##...#.###."},
      {'4', "...#...##..#.#.#..#.#####...#....#."}, {'5', "######....####.....#....##...#.###."},
      {'6', "..##..#...#....####.#...##...#.###."}, {'7', "#####....#...#...#...#....#....#..."},
      {'8', ".###.#...##...#.###.#...##...#.###."}, {'9', ".###.#...##...#.####....#...#..##.."},
      {'A', ".###.#...##...#######...##...##...#"}, {'B', "####.#...##...#####.#...##...#####."},
      {'C', ".###.#...##....#....#....#...#.###."}, {'D', "###..#..#.#...##...##...##..#.###.."},
      {'E', "######....#....####.#....#....#####"}, {'F', "######....#....####.#....#....#...."},
      {'G', ".###.#...##....#.####...##...#.####"}, {'H', "#...##...##...#######...##...##...#"},
      {'I', ".###...#....#....#....#....#...###."}, {'J', "..###...#....#....#....#.#..#..##.."},
      {'K', "#...##..#.#.#..##...#.#..#..#.#...#"}, {'L', "#....#....#....#....#....#....#####"},
      {'M', "#...###.###.#.##.#.##...##...##...#"}, {'N', "#...##...###..##.#.##..###...##...#"},
      {'O', ".###.#...##...##...##...##...#.###."}, {'P', "####.#...##...#####.#....#....#...."},
      {'Q', ".###.#...##...##...##.#.##..#..##.#"}, {'R', "####.#...##...#####.#.#..#..#.#...#"},
      {'S', ".#####....#.....###.....#....#####."}, {'T', "#####..#....#....#....#....#....#.."},
      {'U', "#...##...##...##...##...##...#.###."}, {'V', "#...##...##...##...##...#.#.#...#.."},
      {'W', "#...##...##...##.#.##.#.##.#.#.#.#."}, {'X', "#...##...#.#.#...#...#.#.#...##...#"},
      {'Y', "#...##...#.#.#...#....#....#....#.."}, {'Z', "#####....#...#...#...#...#....#####"},
      {'.', "..........................##...##.."}, {'%', "##...##..#...#...#...#...#..##...##"},
      {'=', "..........#####.....#####.........."}, {'-', "...............#####..............."},
      {'+', ".......#....#..#####..#....#......."}, {':', "......##...##........##...##......."},
      {' ', "..................................."},
  };
  return glyphs;
}

struct Raster {
  int w, h;
  std::vector<png_byte> px;
  Raster(int width, int height) : w(width), h(height), px(static_cast<std::size_t>(width * height * 3), 255) {}

  void fill(int x0, int y0, int x1, int y1, std::array<int, 3> rgb) {
    for (int y = std::max(0, y0); y < std::min(h, y1); ++y) {
      for (int x = std::max(0, x0); x < std::min(w, x1); ++x) {
        for (int c = 0; c < 3; ++c) px[(static_cast<std::size_t>(y) * w + x) * 3 + c] = static_cast<png_byte>(rgb[c]);
      }
    }
  }

  // Scale 2; unknown characters print as blanks.
  void text(int x, int y, const std::string& s, std::array<int, 3> rgb = {0, 0, 0}) {
    for (char ch : s) {
      const char up = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
      auto it = font().find(up);
      if (it != font().end()) {
        for (int r = 0; r < 7; ++r) {
          for (int c = 0; c < 5; ++c) {
            if (it->second[r * 5 + c] == '#') fill(x + 2 * c, y + 2 * r, x + 2 * c + 2, y + 2 * r + 2, rgb);
          }
        }
      }
      x += 12;
    }
  }

  static int text_width(const std::string& s) { return static_cast<int>(s.size()) * 12; }
};

void write_png(const Raster& img, const std::filesystem::path& path) {
  FILE* fp = std::fopen(path.string().c_str(), "wb");
  if (!fp) fail(ErrorKind::Io, "cannot write '" + path.string() + "'");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    fail(ErrorKind::Io, "libpng failed writing '" + path.string() + "'");
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, img.w, img.h, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < img.h; ++y) {
    png_write_row(png, img.px.data() + static_cast<std::size_t>(y) * img.w * 3);
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  if (std::fclose(fp) != 0) fail(ErrorKind::Io, "cannot finish '" + path.string() + "'");
}

}  // namespace

std::string series_label(const ResultTable& t) {
  std::string s = t.method;
  if (t.label_ratio >= 0.0) s += " " + fixed(100.0 * t.label_ratio, 0) + "%";
  if (t.k_shot > 0) s += " k=" + std::to_string(t.k_shot);
  return s;
}

std::string results_csv(const std::vector<ResultTable>& tables) {
  struct Row {
    const ResultTable* t;
    const SubjectResult* r;
  };
  std::vector<Row> rows;
  for (const auto& t : tables) {
    for (const auto& r : t.rows) rows.push_back({&t, &r});
  }
  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    return std::tie(a.t->method, a.t->label_ratio, a.t->k_shot, a.t->seed, a.t->config_hash,
                    a.r->subject) < std::tie(b.t->method, b.t->label_ratio, b.t->k_shot,
                                             b.t->seed, b.t->config_hash, b.r->subject);
  });
  std::ostringstream out;
  out << "method,subject,k_shot,label_ratio,seed,accuracy_pct,n_queries,config_hash\n";
  for (const auto& [t, r] : rows) {
    out << t->method << ',' << r->subject << ',' << t->k_shot << ','
        << (t->label_ratio >= 0.0 ? fixed(t->label_ratio, 2) : "") << ',' << t->seed << ','
        << fixed(r->accuracy_pct, 4) << ',' << r->n_queries << ',' << t->config_hash << '\n';
  }
  return out.str();
}

json table_to_json(const ResultTable& t) {
  json rows = json::array();
  for (const auto& r : t.rows) {
    rows.push_back({{"subject", r.subject}, {"accuracy_pct", r.accuracy_pct}, {"n_queries", r.n_queries}});
  }
  return {{"method", t.method},       {"k_shot", t.k_shot},
          {"label_ratio", t.label_ratio}, {"seed", t.seed},
          {"config_hash", t.config_hash}, {"rows", rows},
          {"confusion", t.confusion}};
}

ResultTable table_from_json(const json& j) {
  try {
    ResultTable t;
    t.method = j.at("method").get<std::string>();
    t.k_shot = j.at("k_shot").get<std::size_t>();
    t.label_ratio = j.at("label_ratio").get<double>();
    t.seed = j.at("seed").get<std::uint64_t>();
    t.config_hash = j.at("config_hash").get<std::string>();
    for (const auto& r : j.at("rows")) {
      t.rows.push_back({r.at("subject").get<int>(), r.at("accuracy_pct").get<double>(),
                        r.at("n_queries").get<std::size_t>()});
    }
    t.confusion = j.at("confusion").get<ConfusionMatrix>();
    return t;
  } catch (const json::exception& e) {
    fail(ErrorKind::Io, std::string("malformed result table: ") + e.what());
  }
}

std::string summary_text(const std::vector<ResultTable>& tables) {
  check_tables(tables);
  const auto series = group_series(tables);
  const auto subjects = subjects_of(tables);
  std::ostringstream out;
  for (bool fewshot : {false, true}) {
    std::vector<const Series*> block;
    for (const auto& [key, s] : series) {
      if (std::get<0>(key) == fewshot) block.push_back(&s);
    }
    if (block.empty()) continue;
    out << (fewshot ? "Few-shot accuracy (%), mean +- std over seeds\n"
                    : "Closed-set accuracy (%), mean +- std over seeds\n");
    char buf[64];
    std::snprintf(buf, sizeof buf, "%-16s", "series");
    out << buf;
    for (int s : subjects) {
      std::snprintf(buf, sizeof buf, " %16s", subject_name(s).c_str());
      out << buf;
    }
    std::snprintf(buf, sizeof buf, " %16s %6s\n", "mean", "seeds");
    out << buf;
    for (const Series* s : block) {
      std::snprintf(buf, sizeof buf, "%-16s", s->label.c_str());
      out << buf;
      for (int subj : subjects) {
        const auto v = subject_values(*s, subj);
        const std::string cell =
            v.empty() ? "-" : fixed(mean_std(v).first, 2) + " +- " + fixed(mean_std(v).second, 2);
        std::snprintf(buf, sizeof buf, " %16s", cell.c_str());
        out << buf;
      }
      std::vector<double> means;
      for (const auto* t : s->runs) means.push_back(t->mean_accuracy());
      const auto [m, sd] = mean_std(means);
      const std::string cell = fixed(m, 2) + " +- " + fixed(sd, 2);
      std::snprintf(buf, sizeof buf, " %16s %6zu\n", cell.c_str(), s->runs.size());
      out << buf;
    }
    out << '\n';
  }
  for (const auto& [key, s] : series) {
    ConfusionMatrix sum{};
    std::size_t total = 0;
    for (const auto* t : s.runs) {
      for (int a = 0; a < sim::kNumClasses; ++a) {
        for (int b = 0; b < sim::kNumClasses; ++b) {
          sum[a][b] += t->confusion[a][b];
          total += t->confusion[a][b];
        }
      }
    }
    if (total == 0) continue;
    out << "Confusion " << s.label << " (rows true, columns predicted, summed over seeds)\n";
    for (int a = 0; a < sim::kNumClasses; ++a) {
      for (int b = 0; b < sim::kNumClasses; ++b) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "%8zu", sum[a][b]);
        out << buf;
      }
      out << '\n';
    }
    out << '\n';
  }
  return out.str();
}

void write_bar_chart(const std::vector<ResultTable>& tables, const std::filesystem::path& png) {
  check_tables(tables);
  static const std::array<std::array<int, 3>, 10> palette = {{{31, 119, 180}, {255, 127, 14},
                                                              {44, 160, 44},  {214, 39, 40},
                                                              {148, 103, 189}, {140, 86, 75},
                                                              {227, 119, 194}, {127, 127, 127},
                                                              {188, 189, 34}, {23, 190, 207}}};
  const auto series = group_series(tables);
  const auto subjects = subjects_of(tables);
  const int n_series = static_cast<int>(series.size());
  const int bar_w = 12, group_gap = 24, left = 70, top = 20, plot_h = 300;
  const int group_w = n_series * bar_w + group_gap;
  int legend_w = 0;
  for (const auto& [key, s] : series) legend_w = std::max(legend_w, 30 + Raster::text_width(s.label));
  const int width = std::max(left + static_cast<int>(subjects.size()) * group_w + 20, left + legend_w + 20);
  const int legend_top = top + plot_h + 40;
  const int height = legend_top + n_series * 22 + 10;
  Raster img(width, height);

  const int base = top + plot_h;
  for (int pct = 0; pct <= 100; pct += 20) {
    const int y = base - pct * plot_h / 100;
    img.fill(left, y, width - 10, y + 1, {210, 210, 210});
    const std::string lab = std::to_string(pct);
    img.text(left - 8 - Raster::text_width(lab), y - 7, lab);
  }
  img.fill(left, top, left + 1, base + 1, {0, 0, 0});
  img.fill(left, base, width - 10, base + 1, {0, 0, 0});

  for (std::size_t g = 0; g < subjects.size(); ++g) {
    const int gx = left + group_gap / 2 + static_cast<int>(g) * group_w;
    int si = 0;
    for (const auto& [key, s] : series) {
      const auto v = subject_values(s, subjects[g]);
      if (!v.empty()) {
        const double m = mean_std(v).first;
        const int bh = static_cast<int>(std::lround(m * plot_h / 100.0));
        img.fill(gx + si * bar_w, base - bh, gx + (si + 1) * bar_w - 1, base, palette[si % palette.size()]);
      }
      ++si;
    }
    const std::string name = subject_name(subjects[g]);
    img.text(gx + (n_series * bar_w - Raster::text_width(name)) / 2, base + 8, name);
  }

  int si = 0;
  for (const auto& [key, s] : series) {
    const int y = legend_top + si * 22;
    img.fill(left, y, left + 16, y + 14, palette[si % palette.size()]);
    img.text(left + 24, y, s.label);
    ++si;
  }
  write_png(img, png);
}

void report(const std::vector<ResultTable>& tables, const std::filesystem::path& out_dir) {
  check_tables(tables);
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec || !std::filesystem::is_directory(out_dir)) {
    fail(ErrorKind::Io, "cannot create output directory '" + out_dir.string() + "'");
  }
  write_text(out_dir / "results.csv", results_csv(tables));
  write_text(out_dir / "summary.txt", summary_text(tables));
  write_bar_chart(tables, out_dir / "accuracy_by_subject.png");
}

}  // namespace sonarfit::harness
