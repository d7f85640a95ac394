extern "C" { int sph_placeholder(void); int sph_placeholder(void){return 0;} }
