// Regenerates the benchmark model files under data/. The instances are
// drawn on fixed streams, so the output is byte-stable.

#include <fstream>
#include <iostream>

#include "avi/models/lda.hpp"

int main(int argc, char** argv) {
  const std::string dir = argc > 1 ? argv[1] : "data";
  {
    std::ofstream os(dir + "/qmr_desk.model");
    if (!os) {
      std::cerr << "cannot write to " << dir << "\n";
      return 1;
    }
    avi::models::write_qmr(os, avi::models::make_desk_qmr());
  }
  {
    std::ofstream os(dir + "/lda_desk.model");
    avi::models::write_lda(os, avi::models::make_desk_lda());
  }
  std::cout << "wrote " << dir << "/qmr_desk.model and " << dir << "/lda_desk.model\n";
  return 0;
}
