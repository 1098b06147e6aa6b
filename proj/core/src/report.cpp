#include "noisebench/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>

#include <fmt/format.h>

#include "json.hpp"
#include "noisebench/errors.hpp"
#include "noisebench/rng.hpp"

namespace noisebench {
namespace {

using nlohmann::ordered_json;

constexpr std::string_view kCsvHeader = "attack,level,rep,n,correct,accuracy";

std::string format_fraction(double v) { return fmt::format("{:.6f}", v); }

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  for (;;) {
    const auto at = s.find(sep, pos);
    if (at == std::string_view::npos) {
      out.push_back(s.substr(pos));
      return out;
    }
    out.push_back(s.substr(pos, at - pos));
    pos = at + 1;
  }
}

template <class T>
T parse_unsigned(std::string_view field, std::size_t line, std::string_view what) {
  T value{};
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size() || field.empty()) {
    throw FormatError(fmt::format("CSV line {}: invalid {} '{}'", line, what, field));
  }
  return value;
}

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                    "#9467bd", "#8c564b", "#e377c2", "#17becf"};

struct Series {
  std::string label;
  std::vector<std::pair<double, double>> points;  // (attacks, accuracy %)
};

double nice_step(double range) {
  if (range <= 0) return 1;
  const double raw = range / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    if (raw <= m * mag) return m * mag;
  }
  return 10 * mag;
}

std::string svg_chart(std::string_view title, const std::vector<Series>& series) {
  constexpr double kWidth = 640, kHeight = 420;
  constexpr double kLeft = 64, kRight = 180, kTop = 40, kBottom = 56;
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;

  double x_max = 0;
  for (const auto& s : series) {
    for (const auto& p : s.points) x_max = std::max(x_max, p.first);
  }
  if (x_max <= 0) x_max = 1;
  auto sx = [&](double x) { return kLeft + x / x_max * plot_w; };
  auto sy = [&](double y) { return kTop + (100.0 - y) / 100.0 * plot_h; };

  std::string out;
  out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{0}\" height=\"{1}\" "
      "viewBox=\"0 0 {0} {1}\">\n",
      kWidth, kHeight);
  out += fmt::format("<rect x=\"0\" y=\"0\" width=\"{}\" height=\"{}\" fill=\"#ffffff\"/>\n", kWidth, kHeight);
  out += fmt::format(
      "<text x=\"{:.2f}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
      "font-size=\"16\">{}</text>\n",
      kLeft + plot_w / 2, xml_escape(title));

  out += "<g stroke=\"#dddddd\" stroke-width=\"1\" font-family=\"sans-serif\" font-size=\"11\">\n";
  for (int y = 0; y <= 100; y += 20) {
    out += fmt::format("<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\"/>\n", kLeft, sy(y),
                       kLeft + plot_w, sy(y));
    out += fmt::format(
        "<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"end\" stroke=\"none\" fill=\"#333333\">{}</text>\n",
        kLeft - 6, sy(y) + 4, y);
  }
  const double step = nice_step(x_max);
  for (double x = 0; x <= x_max + 1e-9; x += step) {
    out += fmt::format("<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\"/>\n", sx(x), kTop, sx(x),
                       kTop + plot_h);
    out += fmt::format(
        "<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"middle\" stroke=\"none\" fill=\"#333333\">{}</text>\n",
        sx(x), kTop + plot_h + 16, x);
  }
  out += "</g>\n";
  out += fmt::format(
      "<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"none\" stroke=\"#333333\"/>\n",
      kLeft, kTop, plot_w, plot_h);
  out += fmt::format(
      "<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"middle\" font-family=\"sans-serif\" "
      "font-size=\"12\">Attacks</text>\n",
      kLeft + plot_w / 2, kHeight - 16);
  out += fmt::format(
      "<text x=\"16\" y=\"{:.2f}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
      "transform=\"rotate(-90 16 {:.2f})\">Accuracy (%)</text>\n",
      kTop + plot_h / 2, kTop + plot_h / 2);

  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* color = kPalette[i % std::size(kPalette)];
    std::string pts;
    for (const auto& [x, y] : series[i].points) {
      if (!pts.empty()) pts += ' ';
      pts += fmt::format("{:.2f},{:.2f}", sx(x), sy(y));
    }
    out += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"2\" points=\"{}\"/>\n", color, pts);
    const double ly = kTop + 10 + 18.0 * static_cast<double>(i);
    out += fmt::format(
        "<line x1=\"{0:.2f}\" y1=\"{1:.2f}\" x2=\"{2:.2f}\" y2=\"{1:.2f}\" stroke=\"{3}\" stroke-width=\"2\"/>\n",
        kLeft + plot_w + 12, ly, kLeft + plot_w + 32, color);
    out += fmt::format(
        "<text x=\"{:.2f}\" y=\"{:.2f}\" font-family=\"sans-serif\" font-size=\"11\">{}</text>\n",
        kLeft + plot_w + 38, ly + 4, xml_escape(series[i].label));
  }
  out += "</svg>\n";
  return out;
}

Series series_for(const Summary& summary, AttackKind kind, std::string label) {
  Series s{std::move(label), {}};
  for (std::uint32_t level : summary.levels) {
    s.points.emplace_back(static_cast<double>(level), 100.0 * summary.at(kind, level).mean);
  }
  return s;
}

std::string_view classifier_label(const Summary& s) {
  return s.classifier.empty() ? std::string_view("classifier") : std::string_view(s.classifier);
}

}  // namespace

std::string to_csv(const AccuracyGrid& grid) {
  std::string out(kCsvHeader);
  out += '\n';
  for (const auto& [key, cell] : grid.cells) {
    out += fmt::format("{},{},{},{},{},{}\n", short_name(key.kind), key.level, key.rep, cell.n, cell.correct,
                       format_fraction(cell.accuracy()));
  }
  return out;
}

AccuracyGrid parse_csv(std::string_view text) {
  auto lines = split(text, '\n');
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty()) throw FormatError("CSV: empty input");
  if (lines.front() != kCsvHeader) {
    throw FormatError(fmt::format("CSV: expected header '{}'", kCsvHeader));
  }
  if (lines.size() == 1) throw FormatError("CSV: no data rows");

  std::vector<CellResult> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    const auto f = split(lines[i], ',');
    if (f.size() != 6) throw FormatError(fmt::format("CSV line {}: expected 6 fields", line_no));
    const auto kind = parse_attack_kind(f[0]);
    if (!kind) throw FormatError(fmt::format("CSV line {}: unknown attack '{}'", line_no, f[0]));
    CellResult r;
    r.key = {*kind, parse_unsigned<std::uint32_t>(f[1], line_no, "level"),
             parse_unsigned<std::uint32_t>(f[2], line_no, "rep")};
    r.n = parse_unsigned<std::uint64_t>(f[3], line_no, "n");
    r.correct = parse_unsigned<std::uint64_t>(f[4], line_no, "correct");
    if (r.n == 0 || r.correct > r.n) throw FormatError(fmt::format("CSV line {}: invalid counts", line_no));
    if (f[5] != format_fraction(r.accuracy())) {
      throw FormatError(fmt::format("CSV line {}: accuracy '{}' disagrees with {}/{}", line_no, f[5],
                                    r.correct, r.n));
    }
    rows.push_back(r);
  }

  AccuracyGrid grid;
  std::set<AttackKind> kinds;
  std::set<std::uint32_t> levels;
  std::uint32_t max_rep = 0;
  for (const auto& r : rows) {
    kinds.insert(r.key.kind);
    levels.insert(r.key.level);
    max_rep = std::max(max_rep, r.key.rep);
    if (r.n != rows.front().n) throw FormatError("CSV: cells evaluate different image counts");
  }
  grid.kinds.assign(kinds.begin(), kinds.end());
  grid.levels.assign(levels.begin(), levels.end());
  grid.reps = max_rep + 1;
  grid.images_per_cell = rows.front().n;
  for (const auto& r : rows) {
    try {
      grid.record(r);
    } catch (const ContractViolation& e) {
      throw FormatError(fmt::format("CSV: {}", e.what()));
    }
  }
  return grid;
}

std::string to_json(const AccuracyGrid& grid) {
  ordered_json j;
  j["classifier"] = grid.classifier;
  j["master_seed"] = grid.master_seed ? ordered_json(*grid.master_seed) : ordered_json(nullptr);
  j["images_per_cell"] = grid.images_per_cell;
  j["reps"] = grid.reps;
  std::vector<std::string> kinds;
  for (AttackKind k : grid.kinds) kinds.emplace_back(short_name(k));
  j["attacks"] = kinds;
  j["levels"] = grid.levels;
  j["cells"] = ordered_json::array();
  for (const auto& [key, cell] : grid.cells) {
    ordered_json c;
    c["attack"] = short_name(key.kind);
    c["level"] = key.level;
    c["rep"] = key.rep;
    c["n"] = cell.n;
    c["correct"] = cell.correct;
    c["accuracy"] = cell.accuracy();
    j["cells"].push_back(std::move(c));
  }
  if (grid.complete()) {
    const Summary s = summarize(grid);
    j["summary"] = ordered_json::array();
    for (AttackKind k : s.kinds) {
      for (std::uint32_t level : s.levels) {
        const auto& p = s.at(k, level);
        ordered_json e;
        e["attack"] = short_name(k);
        e["level"] = level;
        e["mean"] = p.mean;
        e["std"] = p.stddev;
        j["summary"].push_back(std::move(e));
      }
    }
  }
  return j.dump(2) + "\n";
}

std::string render_table(const Summary& summary, std::span<const std::uint32_t> levels) {
  for (std::uint32_t level : levels) {
    if (!summary.has_level(level)) {
      throw ContractViolation(fmt::format("table level {} is not present in the results", level));
    }
  }
  std::vector<AttackKind> columns;
  for (AttackKind k : kTableKindOrder) {
    if (std::find(summary.kinds.begin(), summary.kinds.end(), k) != summary.kinds.end()) columns.push_back(k);
  }
  std::string out = fmt::format("{}\n", classifier_label(summary));
  out += fmt::format("{:<8}", "Attacks");
  for (AttackKind k : columns) out += fmt::format("{:>8}", table_label(k));
  out += '\n';
  for (std::uint32_t level : levels) {
    out += fmt::format("{:<8}", level);
    for (AttackKind k : columns) out += fmt::format("{:>8.2f}", 100.0 * summary.at(k, level).mean);
    out += '\n';
  }
  return out;
}

std::string render_svg_lines(std::span<const Summary> series, AttackKind kind) {
  std::vector<Series> lines;
  for (const auto& s : series) lines.push_back(series_for(s, kind, std::string(classifier_label(s))));
  return svg_chart(display_name(kind), lines);
}

std::string render_svg_combined(const Summary& summary) {
  std::vector<Series> lines;
  for (AttackKind k : kTableKindOrder) {
    if (std::find(summary.kinds.begin(), summary.kinds.end(), k) == summary.kinds.end()) continue;
    lines.push_back(series_for(summary, k, std::string(display_name(k))));
  }
  return svg_chart(classifier_label(summary), lines);
}

std::string encode_pgm(const GrayImage& image) {
  std::string out = fmt::format("P5\n{} {}\n255\n", image.width, image.height);
  out.append(image.pixels.begin(), image.pixels.end());
  return out;
}

void write_pgm(const GrayImage& image, const std::filesystem::path& path) {
  write_file(path, encode_pgm(image));
}

std::vector<SamplePair> dump_samples(const ImageSet& images, const AttackSpec& spec, std::uint64_t seed,
                                     std::size_t count, const std::filesystem::path& out_dir) {
  spec.validate();
  if (count > images.size()) {
    throw ContractViolation(fmt::format("requested {} samples from a set of {}", count, images.size()));
  }
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError(fmt::format("cannot create '{}': {}", out_dir.string(), ec.message()));

  std::vector<SamplePair> pairs;
  for (std::size_t i = 0; i < count; ++i) {
    const GrayImage before = images.image_copy(i);
    const GrayImage after =
        perturb_image(before, spec, derive_seed({seed, kind_id(spec.kind), spec.count, 0, i}));
    const std::string stem = fmt::format("{}_{:03}_{:05}", short_name(spec.kind), spec.count, i);
    SamplePair p{i, out_dir / (stem + "_before.pgm"), out_dir / (stem + "_after.pgm")};
    write_pgm(before, p.before);
    write_pgm(after, p.after);
    pairs.push_back(std::move(p));
  }
  return pairs;
}

ReportBundle write_report(const AccuracyGrid& grid, const std::filesystem::path& out_dir,
                          std::span<const std::uint32_t> table_levels) {
  const Summary summary = summarize(grid);
  ReportBundle b;
  b.table_text = render_table(summary, table_levels);

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError(fmt::format("cannot create '{}': {}", out_dir.string(), ec.message()));

  b.csv = out_dir / "grid.csv";
  b.json = out_dir / "grid.json";
  b.table = out_dir / "table.txt";
  write_file(b.csv, to_csv(grid));
  write_file(b.json, to_json(grid));
  write_file(b.table, b.table_text);
  const Summary one[] = {summary};
  for (AttackKind k : summary.kinds) {
    auto path = out_dir / fmt::format("accuracy_{}.svg", short_name(k));
    write_file(path, render_svg_lines(one, k));
    b.svgs.push_back(std::move(path));
  }
  auto combined = out_dir / "accuracy_all.svg";
  write_file(combined, render_svg_combined(summary));
  b.svgs.push_back(std::move(combined));
  return b;
}

}  // namespace noisebench
