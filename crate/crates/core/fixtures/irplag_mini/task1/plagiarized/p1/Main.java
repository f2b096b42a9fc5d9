/* Adds numbers 1..10 */
public class Main {
    public static void main(String[] args) {
        int total = 0;
        for (int k = 1; k <= 10; k++) {
            total += k;
        }
        System.out.println(total);
    }
}
