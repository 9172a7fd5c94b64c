"""
Operations package for the city excellence pipeline.

Contains one module per pipeline stage:
- corpus_ingest: Export parsing and corpus filtering
- geo_attribution: Address parsing and city attribution
- excellence_stats: Citation threshold, z-test and city cutoff
- gazetteer: Offline coordinate lookup and geocoding cache
- map_emit: Marker styling and map file formats
"""
