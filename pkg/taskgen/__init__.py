# Lookup-table task generation for the lookup lab
