#include "tipscan/cli.hpp"

int main(int argc, char** argv) { return tipscan::dispatch(argc, argv); }
