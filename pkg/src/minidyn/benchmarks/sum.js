// Sum of the integers below n.
function sum(n) {
    for (var i=0, s=0; i<n; i++)
        s += i;
    return s;
}

function main() {
    return sum(500);
}
