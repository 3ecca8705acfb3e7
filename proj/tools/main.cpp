#include "surad/cli.hpp"

int main(int argc, char** argv) { return surad::dispatch(argc, argv); }
