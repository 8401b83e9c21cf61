#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "trainlets/error.hpp"

namespace trainlets {

enum class WaveletFamily : std::uint8_t { Haar = 0, Daubechies = 1, Symlet = 2 };

inline std::string_view to_string(WaveletFamily f) {
  switch (f) {
    case WaveletFamily::Haar:
      return "haar";
    case WaveletFamily::Daubechies:
      return "db";
    case WaveletFamily::Symlet:
      return "sym";
  }
  return "?";
}

/// Accepts "haar", "db"/"daubechies", "sym"/"symlet".
inline WaveletFamily parse_wavelet_family(std::string_view name) {
  if (name == "haar") return WaveletFamily::Haar;
  if (name == "db" || name == "daubechies") return WaveletFamily::Daubechies;
  if (name == "sym" || name == "symlet") return WaveletFamily::Symlet;
  throw Error(ErrorCode::UnsupportedFamily, "unknown wavelet family '" + std::string(name) + "'");
}

inline WaveletFamily wavelet_family_from_id(std::uint32_t id) {
  if (id > 2) throw Error(ErrorCode::UnsupportedFamily, "wavelet family id " + std::to_string(id));
  return static_cast<WaveletFamily>(id);
}

/// Quadrature-mirror pair of an orthogonal wavelet. `lowpass` is the synthesis
/// scaling filter; highpass[i] = (-1)^i * lowpass[taps-1-i].
struct WaveletFilterPair {
  WaveletFamily family = WaveletFamily::Haar;
  int order = 1;
  std::vector<double> lowpass;
  std::vector<double> highpass;

  std::size_t taps() const noexcept { return lowpass.size(); }
};

namespace detail {

// clang-format off
// Synthesis lowpass filters, orders 2..10.
inline const std::array<std::vector<double>, 9> kDaubechies = {{
    {0.48296291314453416, 0.8365163037378079, 0.2241438680420134, -0.12940952255126037},
    {0.33267055295008263, 0.8068915093110925, 0.45987750211849154, -0.13501102001025458,
     -0.08544127388202666, 0.03522629188570953},
    {0.2303778133088965, 0.7148465705529157, 0.6308807679298589, -0.027983769416859854,
     -0.18703481171909309, 0.030841381835560764, 0.0328830116668852, -0.010597401785069032},
    {0.16010239797419293, 0.6038292697971896, 0.7243085284377729, 0.13842814590132074,
     -0.24229488706638203, -0.032244869584638375, 0.07757149384004572, -0.006241490212798274,
     -0.012580751999081999, 0.0033357252854737712},
    {0.11154074335010947, 0.49462389039845306, 0.7511339080210954, 0.31525035170919763,
     -0.22626469396543983, -0.12976686756726194, 0.09750160558732304, 0.027522865530305727,
     -0.03158203931748603, 0.0005538422011614961, 0.004777257510945511, -0.0010773010853084796},
    {0.07785205408500918, 0.3965393194819173, 0.7291320908462351, 0.4697822874051931,
     -0.14390600392856498, -0.22403618499387498, 0.07130921926683026, 0.08061260915108308,
     -0.03802993693501441, -0.01657454163066688, 0.01255099855609984, 0.0004295779729213665,
     -0.0018016407040474908, 0.00035371379997452024},
    {0.05441584224310401, 0.31287159091429995, 0.6756307362972898, 0.5853546836542067,
     -0.015829105256349306, -0.2840155429615469, 0.0004724845739132828, 0.12874742662047847,
     -0.017369301001807547, -0.044088253930794755, 0.013981027917398282, 0.008746094047405777,
     -0.004870352993451574, -0.00039174037337694705, 0.0006754494064505693,
     -0.00011747678412476953},
    {0.038077947363878345, 0.24383467461259034, 0.6048231236901112, 0.6572880780513005,
     0.13319738582500756, -0.2932737832791749, -0.09684078322297646, 0.14854074933810638,
     0.03072568147933338, -0.06763282906132997, 0.00025094711483145197, 0.022361662123679096,
     -0.004723204757751397, -0.00428150368246343, 0.0018476468830562265,
     0.00023038576352319597, -0.0002519631889427101, 3.93473203162716e-05},
    {0.026670057900555554, 0.1881768000776915, 0.5272011889317256, 0.6884590394536035,
     0.2811723436605775, -0.24984642432731538, -0.19594627437737705, 0.12736934033579325,
     0.09305736460357235, -0.07139414716639708, -0.029457536821875813, 0.033212674059341,
     0.0036065535669561697, -0.010733175483330575, 0.001395351747052901, 0.001992405295185056,
     -0.0006858566949597116, -0.00011646685512928545, 9.358867032006959e-05,
     -1.3264202894521244e-05},
}};

// Synthesis lowpass filters, orders 2..10.
inline const std::array<std::vector<double>, 9> kSymlet = {{
    {0.48296291314469025, 0.836516303737469, 0.22414386804185735, -0.12940952255092145},
    {0.3326705529509569, 0.8068915093133388, 0.4598775021193313, -0.13501102001039084,
     -0.08544127388224149, 0.035226291882100656},
    {0.0322231006040427, -0.012603967262037833, -0.09921954357684722, 0.29785779560527736,
     0.8037387518059161, 0.49761866763201545, -0.02963552764599851, -0.07576571478927333},
    {0.019538882735286728, -0.021101834024758855, -0.17532808990845047, 0.01660210576452232,
     0.6339789634582119, 0.7234076904024206, 0.1993975339773936, -0.039134249302383094,
     0.029519490925774643, 0.027333068345077982},
    {-0.007800708325034148, 0.0017677118642428036, 0.04472490177066578, -0.021060292512300564,
     -0.07263752278646252, 0.3379294217276218, 0.787641141030194, 0.4910559419267466,
     -0.048311742585633, -0.11799011114819057, 0.0034907120842174702, 0.015404109327027373},
    {0.010268176708511255, 0.004010244871533663, -0.10780823770381774, -0.14004724044296152,
     0.2886296317515146, 0.767764317003164, 0.5361019170917628, 0.017441255086855827,
     -0.049552834937127255, 0.0678926935013727, 0.03051551316596357, -0.01263630340325193,
     -0.0010473848886829163, 0.002681814568257878},
    {0.0018899503327594609, -0.0003029205147213668, -0.01495225833704823, 0.003808752013890615,
     0.049137179673607506, -0.027219029917056003, -0.05194583810770904, 0.3644418948353314,
     0.7771857517005235, 0.4813596512583722, -0.061273359067658524, -0.1432942383508097,
     0.007607487324917605, 0.03169508781149298, -0.0005421323317911481, -0.0033824159510061256},
    {0.0010694900329086053, -0.0004731544986800831, -0.010264064027633142,
     0.008859267493400484, 0.06207778930288603, -0.018233770779395985, -0.19155083129728512,
     0.035272488035271894, 0.6173384491409358, 0.717897082764412, 0.238760914607303,
     -0.05456895843083407, 0.0005834627461258068, 0.03022487885827568, -0.01152821020767923,
     -0.013271967781817119, 0.0006197808889855868, 0.0014009155259146807},
    {-0.0004593294210046588, 5.7036083618494284e-05, 0.004593173585311828,
     -0.0008043589320165449, -0.02035493981231129, 0.005764912033581909, 0.04999497207737669,
     -0.0319900568824278, -0.03553674047381755, 0.38382676106708546, 0.7695100370211071,
     0.47169066693843925, -0.07088053578324385, -0.15949427888491757, 0.011609893903711381,
     0.0459272392310922, -0.0014653825813050513, -0.008641299277022422, 9.563267072289475e-05,
     0.0007701598091144901},
}};
// clang-format on

inline void check_filter_invariants(const WaveletFilterPair& f) {
  const double tol = 1e-10;
  double sum = 0.0, sq = 0.0;
  for (double c : f.lowpass) {
    sum += c;
    sq += c * c;
  }
  if (std::abs(sum - std::sqrt(2.0)) > tol || std::abs(sq - 1.0) > tol)
    throw std::logic_error("wavelet table corrupted: lowpass not normalized");
  const std::size_t n = f.taps();
  for (std::size_t shift = 2; shift < n; shift += 2) {
    double acc = 0.0;
    for (std::size_t i = 0; i + shift < n; ++i) acc += f.lowpass[i] * f.lowpass[i + shift];
    if (std::abs(acc) > tol) throw std::logic_error("wavelet table corrupted: not shift-orthogonal");
  }
}

}  // namespace detail

/// Filter pair for a family/order. Haar ignores `order`; Daubechies and Symlet
/// accept orders 2..10 (2*order taps).
inline WaveletFilterPair wavelet_filters(WaveletFamily family, int order) {
  WaveletFilterPair f;
  f.family = family;
  switch (family) {
    case WaveletFamily::Haar:
      f.order = 1;
      f.lowpass = {1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0)};
      break;
    case WaveletFamily::Daubechies:
    case WaveletFamily::Symlet: {
      if (order < 2 || order > 10)
        throw Error(ErrorCode::InvalidOrder, "order " + std::to_string(order) + " outside 2..10");
      f.order = order;
      const auto& table = family == WaveletFamily::Daubechies ? detail::kDaubechies : detail::kSymlet;
      f.lowpass = table[static_cast<std::size_t>(order - 2)];
      break;
    }
    default:
      throw Error(ErrorCode::UnsupportedFamily, "family id " + std::to_string(static_cast<int>(family)));
  }
  const std::size_t n = f.taps();
  f.highpass.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double sign = (i % 2 == 0) ? 1.0 : -1.0;
    f.highpass[i] = sign * f.lowpass[n - 1 - i];
  }
  detail::check_filter_invariants(f);
  return f;
}

}  // namespace trainlets
