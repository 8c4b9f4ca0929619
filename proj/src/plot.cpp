#include "rotamatch/plot.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>

#include "rotamatch/viewpair_io.hpp"

namespace rotamatch::plot {

namespace {

struct Glyph {
  char ch;
  uint8_t rows[7];  // 5-bit rows, MSB = leftmost column
};

constexpr Glyph kFont[] = {
    {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}},
    {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
    {'2', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}},
    {'3', {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}},
    {'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}},
    {'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
    {'6', {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}},
    {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
    {'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}},
    {'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}},
    {'A', {0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
    {'B', {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E}},
    {'C', {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}},
    {'D', {0x1C, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1C}},
    {'E', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}},
    {'F', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10}},
    {'G', {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F}},
    {'H', {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
    {'I', {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}},
    {'J', {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C}},
    {'K', {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}},
    {'L', {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F}},
    {'M', {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11}},
    {'N', {0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11}},
    {'O', {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
    {'P', {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10}},
    {'Q', {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D}},
    {'R', {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11}},
    {'S', {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E}},
    {'T', {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}},
    {'U', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
    {'V', {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04}},
    {'W', {0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A}},
    {'X', {0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11}},
    {'Y', {0x11, 0x11, 0x11, 0x0A, 0x04, 0x04, 0x04}},
    {'Z', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F}},
    {'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C}},
    {',', {0x00, 0x00, 0x00, 0x00, 0x0C, 0x04, 0x08}},
    {'-', {0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00}},
    {'+', {0x00, 0x04, 0x04, 0x1F, 0x04, 0x04, 0x00}},
    {'%', {0x18, 0x19, 0x02, 0x04, 0x08, 0x13, 0x03}},
    {'(', {0x02, 0x04, 0x08, 0x08, 0x08, 0x04, 0x02}},
    {')', {0x08, 0x04, 0x02, 0x02, 0x02, 0x04, 0x08}},
    {':', {0x00, 0x0C, 0x0C, 0x00, 0x0C, 0x0C, 0x00}},
    {'/', {0x01, 0x01, 0x02, 0x04, 0x08, 0x10, 0x10}},
    {'=', {0x00, 0x00, 0x1F, 0x00, 0x1F, 0x00, 0x00}},
    {'@', {0x0E, 0x11, 0x01, 0x0D, 0x15, 0x15, 0x0E}},
    {'_', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x1F}},
};

const uint8_t* glyph_rows(char ch) {
  char up = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  for (const auto& g : kFont)
    if (g.ch == up) return g.rows;
  return nullptr;
}

struct Canvas {
  geom::Image im;

  void put(int x, int y, const Color& c, double alpha = 1.0) {
    if (x < 0 || y < 0 || x >= im.w || y >= im.h) return;
    im.at(y, x, 0) = (1 - alpha) * im.at(y, x, 0) + alpha * c.r;
    im.at(y, x, 1) = (1 - alpha) * im.at(y, x, 1) + alpha * c.g;
    im.at(y, x, 2) = (1 - alpha) * im.at(y, x, 2) + alpha * c.b;
  }

  void fill_rect(int x0, int y0, int x1, int y1, const Color& c, double alpha = 1.0) {
    for (int y = std::min(y0, y1); y <= std::max(y0, y1); ++y)
      for (int x = std::min(x0, x1); x <= std::max(x0, x1); ++x) put(x, y, c, alpha);
  }

  void line(int x0, int y0, int x1, int y1, const Color& c, int thick = 1) {
    int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
    int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    while (true) {
      for (int oy = 0; oy < thick; ++oy)
        for (int ox = 0; ox < thick; ++ox) put(x0 + ox, y0 + oy, c);
      if (x0 == x1 && y0 == y1) break;
      int e2 = 2 * err;
      if (e2 >= dy) {
        err += dy;
        x0 += sx;
      }
      if (e2 <= dx) {
        err += dx;
        y0 += sy;
      }
    }
  }

  void text(int x, int y, const std::string& s, const Color& c, int scale = 1) {
    for (char ch : s) {
      const uint8_t* rows = glyph_rows(ch);
      if (rows) {
        for (int r = 0; r < 7; ++r)
          for (int col = 0; col < 5; ++col)
            if (rows[r] & (0x10 >> col))
              fill_rect(x + col * scale, y + r * scale, x + col * scale + scale - 1,
                        y + r * scale + scale - 1, c);
      }
      x += 6 * scale;
    }
  }
};

int text_width(const std::string& s, int scale = 1) {
  return static_cast<int>(s.size()) * 6 * scale - scale;
}

// Tick step of the form {1,2,5}*10^k closest below range/target.
double nice_step(double range, int target) {
  double raw = range / std::max(target, 1);
  double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (raw <= m * mag * (1 + 1e-12)) return m * mag;
  return 10.0 * mag;
}

std::string fmt_tick(double v) {
  if (std::abs(v) < 1e-12) v = 0;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

}  // namespace

const Color& palette(size_t i) {
  static const Color kPalette[] = {
      {0.85, 0.22, 0.18}, {0.16, 0.42, 0.80}, {0.13, 0.60, 0.30},
      {0.85, 0.55, 0.10}, {0.55, 0.25, 0.70}, {0.35, 0.35, 0.35},
  };
  return kPalette[i % (sizeof kPalette / sizeof kPalette[0])];
}

geom::Image render_plot(const PlotConfig& cfg, const std::vector<Series>& series) {
  Canvas cv{geom::Image::zeros(cfg.height, cfg.width, 3)};
  const Color white{1, 1, 1}, black{0, 0, 0}, grey{0.82, 0.82, 0.82};
  cv.fill_rect(0, 0, cfg.width - 1, cfg.height - 1, white);

  double xmin = cfg.xmin, xmax = cfg.xmax, ymin = cfg.ymin, ymax = cfg.ymax;
  if (xmin >= xmax || ymin >= ymax) {
    bool any = false;
    double fx0 = 0, fx1 = 0, fy0 = 0, fy1 = 0;
    for (const auto& s : series)
      for (size_t i = 0; i < s.x.size(); ++i) {
        double ci = i < s.ci_half.size() ? s.ci_half[i] : 0.0;
        if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
        if (!any) {
          fx0 = fx1 = s.x[i];
          fy0 = s.y[i] - ci;
          fy1 = s.y[i] + ci;
          any = true;
        } else {
          fx0 = std::min(fx0, s.x[i]);
          fx1 = std::max(fx1, s.x[i]);
          fy0 = std::min(fy0, s.y[i] - ci);
          fy1 = std::max(fy1, s.y[i] + ci);
        }
      }
    if (!any) {
      fx0 = fy0 = 0;
      fx1 = fy1 = 1;
    }
    double px = (fx1 - fx0) * 0.05 + 1e-9, py = (fy1 - fy0) * 0.05 + 1e-9;
    if (xmin >= xmax) {
      xmin = fx0 - px;
      xmax = fx1 + px;
    }
    if (ymin >= ymax) {
      ymin = fy0 - py;
      ymax = fy1 + py;
    }
  }

  const int ml = 58, mr = 18, mt = cfg.title.empty() ? 18 : 34, mb = 46;
  const int x0 = ml, x1 = cfg.width - mr, y0 = mt, y1 = cfg.height - mb;
  auto mapx = [&](double v) {
    return x0 + static_cast<int>(std::lround((v - xmin) / (xmax - xmin) * (x1 - x0)));
  };
  auto mapy = [&](double v) {
    return y1 - static_cast<int>(std::lround((v - ymin) / (ymax - ymin) * (y1 - y0)));
  };

  // gridlines and tick labels
  double xstep = nice_step(xmax - xmin, 6), ystep = nice_step(ymax - ymin, 6);
  for (double v = std::ceil(xmin / xstep) * xstep; v <= xmax + 1e-12; v += xstep) {
    int px = mapx(v);
    cv.line(px, y0, px, y1, grey);
    std::string t = fmt_tick(v);
    cv.text(px - text_width(t) / 2, y1 + 6, t, black);
  }
  for (double v = std::ceil(ymin / ystep) * ystep; v <= ymax + 1e-12; v += ystep) {
    int py = mapy(v);
    cv.line(x0, py, x1, py, grey);
    std::string t = fmt_tick(v);
    cv.text(x0 - 6 - text_width(t), py - 3, t, black);
  }

  // CI bands under the lines
  for (const auto& s : series) {
    if (s.ci_half.empty()) continue;
    for (size_t i = 0; i + 1 < s.x.size(); ++i) {
      int xa = mapx(s.x[i]), xb = mapx(s.x[i + 1]);
      if (xa > xb) std::swap(xa, xb);
      for (int px = std::max(xa, x0); px <= std::min(xb, x1); ++px) {
        double t = xb == xa ? 0.0
                            : static_cast<double>(px - mapx(s.x[i])) /
                                  (mapx(s.x[i + 1]) - mapx(s.x[i]));
        double y = s.y[i] + t * (s.y[i + 1] - s.y[i]);
        double ci = s.ci_half[i] + t * (s.ci_half[i + 1] - s.ci_half[i]);
        int pa = mapy(y + ci), pb = mapy(y - ci);
        for (int py = std::max(pa, y0); py <= std::min(pb, y1); ++py)
          cv.put(px, py, s.color, 0.22);
      }
    }
  }

  // series lines and point markers
  for (const auto& s : series) {
    for (size_t i = 0; i + 1 < s.x.size(); ++i)
      cv.line(mapx(s.x[i]), mapy(s.y[i]), mapx(s.x[i + 1]), mapy(s.y[i + 1]), s.color,
              2);
    for (size_t i = 0; i < s.x.size(); ++i)
      cv.fill_rect(mapx(s.x[i]) - 1, mapy(s.y[i]) - 1, mapx(s.x[i]) + 2,
                   mapy(s.y[i]) + 2, s.color);
  }

  // frame on top of data
  cv.line(x0, y0, x1, y0, black);
  cv.line(x0, y1, x1, y1, black);
  cv.line(x0, y0, x0, y1, black);
  cv.line(x1, y0, x1, y1, black);

  if (!cfg.title.empty())
    cv.text((cfg.width - text_width(cfg.title, 2)) / 2, 8, cfg.title, black, 2);
  if (!cfg.xlabel.empty())
    cv.text((x0 + x1 - text_width(cfg.xlabel)) / 2, cfg.height - 14, cfg.xlabel, black);
  if (!cfg.ylabel.empty()) cv.text(4, y0 - 10, cfg.ylabel, black);

  // legend, top-right inside the frame
  int ly = y0 + 6;
  for (const auto& s : series) {
    if (s.label.empty()) continue;
    int lw = text_width(s.label) + 22;
    int lx = x1 - 6 - lw;
    cv.fill_rect(lx, ly + 2, lx + 14, ly + 4, s.color);
    cv.text(lx + 20, ly, s.label, black);
    ly += 12;
  }
  return cv.im;
}

void write_plot(const std::filesystem::path& path, const PlotConfig& cfg,
                const std::vector<Series>& series) {
  io::write_ppm(path, render_plot(cfg, series));
}

}  // namespace rotamatch::plot
