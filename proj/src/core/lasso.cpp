namespace sph {}
