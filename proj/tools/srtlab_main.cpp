#include "srtlab/experiment.hpp"

int main(int argc, char** argv) { return srt::run_cli(argc, argv); }
